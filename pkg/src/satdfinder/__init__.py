"""Two-step identification of self-admitted technical debt.

Step 1 mines high-precision keyword patterns from labeled projects and
auto-classifies matching comments. Step 2 ranks the remaining comments with an
incrementally retrained classifier, queries a human in small batches, and
estimates how many SATDs are still undiscovered so the reviewer knows when to
stop. A simulation harness reproduces the leave-one-project-out evaluation,
and an HTTP service runs live review sessions with durable event logs.
"""

__version__ = "0.1.0"
