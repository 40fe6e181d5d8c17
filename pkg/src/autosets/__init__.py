"""autosets: compile orbit-generated subsets of Z^d into finite automata.

The package is organised in layers:

- :mod:`autosets.groups` — exact vectors, endomorphisms and lattices in Z^d.
- :mod:`autosets.spanning` — digit systems (spanning sets) for an expanding
  endomorphism, their verification, and word/carry arithmetic.
- :mod:`autosets.automata` — DFAs over digit alphabets, relation automata
  (equality, addition), saturation and base change.
- :mod:`autosets.orbitsets` — the set calculus: translated sums of orbit
  partial-sum sets plus invariant subgroups, compiled to automata, plus the
  sorted-block normal form.
- :mod:`autosets.sparse` — sparsity (polynomial growth) analysis of regular
  languages with certificates.
- :mod:`autosets.recurrences` — zero sets of linear recurrences over function
  fields of characteristic p, as automatic sets.
- :mod:`autosets.cli` — the ``autosets`` command line tool.
"""

__version__ = "0.1.0"

from .groups import Endomorphism, Lattice, Vec  # noqa: F401
