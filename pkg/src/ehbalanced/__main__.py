"""Entry point for running ehbalanced as a module."""

from ehbalanced.app import main

if __name__ == "__main__":
    raise SystemExit(main())
