"""Performance regression analysis for continuously tested RAN software.

Separates code-induced throughput changes from channel and load effects.
Commit messages are categorized into protocol layers and functional
components, an environment model predicts the throughput efficiency each
test should reach given its radio conditions and traffic load, and tests
that fall well short of that expectation under favorable conditions are
attributed to the deployed code change.
"""

__version__ = "0.1.0"
