"""automatically run doctests."""

import doctest

import pyjsep.utils


def test_doctests():
    """Find all modules and attempt to run doctest using pytest."""
    doctest.testmod(pyjsep.utils, verbose=True, raise_on_error=True)
