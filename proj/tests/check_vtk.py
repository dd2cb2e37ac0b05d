#!/usr/bin/env python3
# Copyright eddytv contributors.
# SPDX-License-Identifier: Apache-2.0
"""Reads a legacy VTK file with meshio and checks counts and a constant sigma field.

usage: check_vtk.py FILE NUM_POINTS NUM_TETS NUM_DOFS VALUE
Exit 77 when meshio is unavailable.
"""
import sys

try:
    import meshio
    import numpy as np
except ImportError:
    sys.exit(77)


def main():
    path, npts, ntets, ndofs, value = sys.argv[1:6]
    mesh = meshio.read(path)
    assert mesh.points.shape == (int(npts), 3), mesh.points.shape
    tets = [c for c in mesh.cells if c.type == "tetra"]
    assert len(tets) == 1 and len(tets[0].data) == int(ntets), mesh.cells
    assert len(mesh.cells) == 1, "only tetra cells expected"
    sigma = np.asarray(mesh.point_data["sigma"])
    hits = np.count_nonzero(sigma == float(value))
    assert hits == int(ndofs), (hits, ndofs)
    assert np.count_nonzero(sigma) == int(ndofs)
    assert "subregion" in mesh.cell_data
    print("vtk ok")


if __name__ == "__main__":
    main()
