"""qortho: q-orthogonal polynomial families, moment functionals, and
Sobolev-type orthogonality, verified numerically against recurrence data."""

__version__ = "0.1.0"
