"""MPFA O-method flux stencils on general 2D polygonal meshes.

For every mesh vertex an interaction region is formed by the incident
cells. Inside each cell's subregion the pressure is linear, pinned to
the cell-center value and to continuity values at the midpoints of the
cell's two edges meeting at the vertex. Flux continuity across interior
half-faces (and prescribed flux on Neumann half-faces) closes a small
local system; eliminating the continuity values expresses each half-face
flux as a linear combination of cell-center heads plus a constant from
Dirichlet data. Summing the two half-face contributions per face gives
the full-face stencil. The construction is exact for linear pressure
fields and collapses to two-point stencils on K-orthogonal rectangular
grids.
"""

import numpy as np

__all__ = ["mpfa_o_stencils"]


def _cell_faces_at_vertex(mesh):
    """Map (cell, vertex) -> (face_prev, face_next) in loop order."""
    out = {}
    for c in range(mesh.n_cells):
        vs = mesh.cell_vertices(c)
        fids, _ = mesh.faces_of_cell(c)
        k = len(vs)
        for i in range(k):
            # edge i joins vs[i] and vs[i+1]; vertex vs[i] touches
            # edges i-1 and i
            out[(c, int(vs[i]))] = (int(fids[(i - 1) % k]), int(fids[i]))
    return out


def mpfa_o_stencils(spec, dir_faces, dir_vals, neu_faces, neu_vals):
    """Build per-face flux stencils (cols, weights, constant) for the
    O-method. Returns the same structure as the TPFA builder: lists of
    face ids, column lists, weight lists and constants, covering interior
    and Dirichlet faces. Fluxes are oriented along the stored normal.
    """
    from .discretization import AssemblyError

    mesh = spec.mesh
    Ks = [m.conductivity for m in spec.media]
    dir_val = dict(zip(dir_faces.tolist(), dir_vals))
    neu_val = dict(zip(neu_faces.tolist(), neu_vals))
    cf_at_v = _cell_faces_at_vertex(mesh)

    vert_cells = [[] for _ in range(mesh.n_vertices)]
    for (c, v) in cf_at_v:
        vert_cells[v].append(c)

    # accumulators over active faces (interior + Dirichlet)
    active = [f for f in range(mesh.n_faces)
              if mesh.face_cells[f, 1] >= 0 or f in dir_val]
    coeffs = {f: {} for f in active}
    const = {f: 0.0 for f in active}

    for v in range(mesh.n_vertices):
        cells_v = sorted(vert_cells[v])
        if not cells_v:
            continue
        faces_v = sorted({f for c in cells_v for f in cf_at_v[(c, v)]})
        unknown = [f for f in faces_v if f not in dir_val]
        uidx = {f: i for i, f in enumerate(unknown)}
        cidx = {c: i for i, c in enumerate(cells_v)}
        nu, nc = len(unknown), len(cells_v)

        # subcell flux expressions: (face, cell) -> (cu over local faces,
        # cc over local cells); flux out of `cell` through its half-face
        expr = {}
        for c in cells_v:
            f1, f2 = cf_at_v[(c, v)]
            x_c = mesh.cell_centroid[c]
            G = np.vstack([mesh.face_midpoint[f1] - x_c,
                           mesh.face_midpoint[f2] - x_c])
            det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
            if abs(det) <= 1e-14 * max(mesh.cell_area[c], 1e-30):
                raise AssemblyError(
                    f"vertex {v}: singular interaction region in cell {c}")
            Ginv = np.array([[G[1, 1], -G[0, 1]],
                             [-G[1, 0], G[0, 0]]]) / det
            K_c = Ks[spec.cell_medium[c]]
            for f in (f1, f2):
                sign = 1.0 if mesh.face_cells[f, 0] == c else -1.0
                n_out = sign * mesh.face_normal[f]
                lam = -0.5 * mesh.face_length[f] * (n_out @ K_c @ Ginv)
                cu = np.zeros(2)
                cu[0], cu[1] = lam[0], lam[1]
                expr[(f, c)] = ((f1, f2), cu, -lam.sum())

        if nu:
            M = np.zeros((nu, nu))
            N = np.zeros((nu, nc))
            r = np.zeros(nu)
            for f in unknown:
                i = uidx[f]
                cl, cr = mesh.face_cells[f]
                sides = [cl] if cr < 0 else [cl, cr]
                if cr < 0:
                    # Neumann half-face: prescribed outward flux
                    r[i] += neu_val.get(f, 0.0) * 0.5 * mesh.face_length[f]
                for c in sides:
                    (fa, fb), cu, cc = expr[(f, c)]
                    for ff, cf in ((fa, cu[0]), (fb, cu[1])):
                        if ff in uidx:
                            M[i, uidx[ff]] += cf
                        else:
                            r[i] -= cf * dir_val[ff]
                    N[i, cidx[c]] -= cc
            try:
                X = np.linalg.solve(M, N)
                y = np.linalg.solve(M, r)
            except np.linalg.LinAlgError:
                raise AssemblyError(
                    f"vertex {v}: singular interaction-region system") from None
        else:
            X = np.zeros((0, nc))
            y = np.zeros(0)

        # substitute continuity values into each half-face flux taken
        # from the owner (first adjacent) cell, accumulate per face
        for f in faces_v:
            if f not in coeffs:
                continue  # Neumann faces need no stencil
            c = int(mesh.face_cells[f, 0])
            (fa, fb), cu, cc = expr[(f, c)]
            row = coeffs[f]
            row[c] = row.get(c, 0.0) + cc
            for ff, cf in ((fa, cu[0]), (fb, cu[1])):
                if cf == 0.0:
                    continue
                if ff in uidx:
                    i = uidx[ff]
                    for cc2, j in cidx.items():
                        if X[i, j] != 0.0:
                            row[cc2] = row.get(cc2, 0.0) + cf * X[i, j]
                    const[f] += cf * y[i]
                else:
                    const[f] += cf * dir_val[ff]

    face_ids, cols, ws, gs = [], [], [], []
    for f in active:
        items = sorted(coeffs[f].items())
        face_ids.append(f)
        cols.append([c for c, _ in items])
        ws.append([w for _, w in items])
        gs.append(const[f])
    return face_ids, cols, ws, gs
