from .convert import ConvertError, Summary, convert

__version__ = "0.1.0"
