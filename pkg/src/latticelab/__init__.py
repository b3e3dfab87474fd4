"""latticelab: a lattice-decoding laboratory for outage-limited MIMO.

The package builds the real-valued lattice model of a quasi-static MIMO
channel, decodes it with regularized sphere decoders (with and without
basis reduction, with and without flop budgets), and measures error rates
and complexity scaling across an SNR sweep.
"""

__version__ = "0.1.0"
