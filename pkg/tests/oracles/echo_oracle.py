"""Reference subprocess oracle: decides each request with the built-in predicate of the same name."""

import sys

from llfp.oracles import decide_builtin, serve

if __name__ == "__main__":
    serve(decide_builtin, sys.stdin, sys.stdout)
