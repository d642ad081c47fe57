"""A permission-typed miniature ML: parser, kind checker, affine
permission checker, and interpreter for `.mz` programs."""

__version__ = "0.1.0"
