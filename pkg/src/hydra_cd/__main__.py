"""Allow running as `python -m hydra_cd`."""

from .cli import main

if __name__ == '__main__':
    main()
