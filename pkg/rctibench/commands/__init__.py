"""Command mixins assembled by :class:`rctibench.harness.RctiBench`."""
