"""esic: an elastic interconnect toolchain.

Type-checks declarative system descriptions, lowers typed channel
connections into a primitive fabric graph, simulates the fabric
cycle-accurately under backpressure, and serves typed cosimulation
endpoints to host software over a framed binary protocol.
"""

__version__ = "0.1.0"
