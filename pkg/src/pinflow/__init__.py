"""pinflow: a multiscale simulation laboratory for 2D vortex dynamics with
pinning landscapes and applied currents.

Layers, from microscopic to macroscopic:

- ``particles``   point-vortex dynamics with mixed conservative/dissipative
                  flow, pairwise logarithmic interaction, pinning forces,
                  applied force, and optional thermal noise
- ``meanfield``   continuum vorticity transport (incompressible, lake,
                  compressible, and degenerate-mobility variants) on a
                  periodic box, SSPRK3 time stepping with upwind fluxes
- ``homog``       periodic-cell homogenization: effective velocity tables,
                  invariant measures, depinning thresholds, thermally
                  activated (Arrhenius) creep, and the homogenized
                  large-scale transport equation
- ``glfield``     complex order-parameter diagnostics: synthetic vortex
                  fields, supercurrent and vorticity extraction, winding
                  numbers, and modulated-energy comparisons to limit
                  measures
- ``experiments`` reproducible experiment drivers (convergence studies,
                  velocity-force curves, transport layers) with CSV/SVG/JSON
                  artifacts
- ``cli``         the ``pinflow`` command-line entry point

Supporting modules: ``fields`` (grids and fields), ``spectral`` (FFT
calculus), ``elliptic`` (iterative solvers), ``flow`` (mixed-flow algebra),
``pinning`` (landscape construction), ``metrics`` (empirical deposits and
weak-distance metrics).
"""

__version__ = "0.1.0"
