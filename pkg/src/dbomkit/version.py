"""Single source for the toolkit version recorded inside BOM environments."""

VERSION = "0.1.0"
