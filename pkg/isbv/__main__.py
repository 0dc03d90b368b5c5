#!/usr/bin/env python3

"""Entrypoint module, in case you use `python -m isbv`."""
from isbv.cli import main

if __name__ == "__main__":
    main()
