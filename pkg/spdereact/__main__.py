#!/usr/bin/env python3
from spdereact import main

if __name__ == '__main__':
    main()
