"""Static analysis toolkit for LLM agent system prompts."""

try:
    from ._promptlint import *  # noqa: F401,F403  installed layout
    from ._promptlint import __version__  # noqa: F401
except ImportError:  # build-tree layout: extension dir on sys.path
    from _promptlint import *  # noqa: F401,F403
    from _promptlint import __version__  # noqa: F401
