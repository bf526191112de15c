from mixctc._core import *  # noqa
