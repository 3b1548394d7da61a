import numpy as np
import pytest

from facegen.errors import (
    DegenerateQuad,
    IsolatedVertex,
    NonManifoldEdge,
    TopologyMismatch,
    ZeroAreaFace,
)
from facegen.mesh import (
    QuadMesh,
    build_connectivity,
    edge_length_energy,
    edge_length_energy_mesh,
    uniform_laplacian_apply,
    vertex_normals,
)
from facegen.procedural import cube_mesh, quad_grid, torus_mesh

from conftest import brute_force_vertex_normals, random_closed_mesh


class TestConnectivity:
    def test_cube(self):
        conn = build_connectivity(cube_mesh())
        assert conn.n_edges == 12
        assert np.all(conn.valence == 3)
        assert not conn.boundary_edge.any()
        assert conn.euler_characteristic() == 2

    def test_single_quad(self):
        mesh = QuadMesh(np.eye(4, 3), [[0, 1, 2, 3]])
        conn = build_connectivity(mesh)
        assert conn.n_edges == 4
        assert conn.boundary_edge.all()

    def test_two_quads_share_edge(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                          [2, 0, 0], [2, 1, 0]], dtype=float)
        mesh = QuadMesh(verts, [[0, 1, 2, 3], [1, 4, 5, 2]])
        conn = build_connectivity(mesh)
        assert conn.n_edges == 7
        assert int((~conn.boundary_edge).sum()) == 1

    def test_edges_sorted_canonically(self, rng):
        conn = build_connectivity(random_closed_mesh(rng))
        assert np.all(conn.edges[:, 0] < conn.edges[:, 1])
        order = np.lexsort((conn.edges[:, 1], conn.edges[:, 0]))
        assert np.array_equal(order, np.arange(conn.n_edges))

    def test_deterministic_rebuild(self, rng):
        mesh = random_closed_mesh(rng)
        c1 = build_connectivity(mesh)
        c2 = build_connectivity(mesh)
        assert np.array_equal(c1.edges, c2.edges)
        assert np.array_equal(c1.edge_faces, c2.edge_faces)
        assert np.array_equal(c1.nbr_indices, c2.nbr_indices)

    def test_non_manifold_edge_raises(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                          [0, 0, 1], [1, 0, 1], [0, 0, -1], [1, 0, -1]], dtype=float)
        quads = [[0, 1, 2, 3], [0, 1, 5, 4], [0, 1, 7, 6]]
        with pytest.raises(NonManifoldEdge):
            build_connectivity(QuadMesh(verts, quads))

    def test_degenerate_quad_raises(self):
        with pytest.raises(DegenerateQuad):
            QuadMesh(np.eye(4, 3), [[0, 1, 2, 2]])

    def test_index_out_of_range_raises(self):
        with pytest.raises(DegenerateQuad):
            QuadMesh(np.eye(3, 3), [[0, 1, 2, 3]])


class TestVertexNormals:
    def test_planar_grid(self):
        mesh = quad_grid(3, 3)
        n = vertex_normals(mesh)
        assert np.allclose(np.abs(n[:, 2]), 1.0, atol=1e-12)
        assert np.allclose(n[:, :2], 0.0, atol=1e-12)
        # consistent orientation across the grid
        assert np.all(n[:, 2] == n[0, 2])

    def test_cube_corner(self):
        n = vertex_normals(cube_mesh())
        expect = np.array([-1.0, -1.0, -1.0]) / np.sqrt(3)
        assert np.allclose(n[0], expect, atol=1e-12)

    def test_unit_length(self, rng):
        mesh = random_closed_mesh(rng)
        n = vertex_normals(mesh)
        assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)

    def test_matches_brute_force(self, rng):
        grid = quad_grid(4, 5)
        mesh = QuadMesh(grid.vertices + 0.1 * rng.standard_normal(grid.vertices.shape),
                        grid.quads)
        assert np.allclose(vertex_normals(mesh), brute_force_vertex_normals(mesh),
                           atol=1e-12)

    def test_rotation_equivariance_scale_invariance(self, rng):
        from facegen.model import euler_xyz
        mesh = random_closed_mesh(rng)
        R = euler_xyz(rng.uniform(-1, 1, 3))
        n0 = vertex_normals(mesh)
        n_rot = vertex_normals(mesh.with_vertices(mesh.vertices @ R.T))
        assert np.allclose(n_rot, n0 @ R.T, atol=1e-9)
        n_scaled = vertex_normals(mesh.with_vertices(3.7 * mesh.vertices))
        assert np.allclose(n_scaled, n0, atol=1e-12)

    def test_zero_area_face_warns(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        mesh = QuadMesh(verts, [[0, 1, 2, 3]])   # collinear: zero-area quad
        with pytest.warns(ZeroAreaFace):
            vertex_normals(mesh)


class TestUniformLaplacian:
    def test_constant_field_annihilated(self, rng):
        conn = build_connectivity(random_closed_mesh(rng))
        field = np.tile([1.5, -2.0, 0.25], (conn.n_vertices, 1))
        assert np.allclose(uniform_laplacian_apply(conn, field), 0.0, atol=1e-12)

    def test_one_hot_single_quad(self):
        mesh = QuadMesh(np.eye(4, 3), [[0, 1, 2, 3]])
        conn = build_connectivity(mesh)
        field = np.zeros((4, 3))
        field[0, 0] = 1.0
        out = uniform_laplacian_apply(conn, field)
        assert out[0, 0] == pytest.approx(-1.0)
        assert out[1, 0] == pytest.approx(0.5)   # neighbors of 0 are 1 and 3
        assert out[3, 0] == pytest.approx(0.5)
        assert out[2, 0] == pytest.approx(0.0)

    def test_linear_field_on_cycle(self):
        # 4-vertex cycle built from a torus-like band: hand-computed response
        # of f(x) = x on a closed loop 0-1-2-3 with coordinates 0,1,2,1
        verts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 1, 0],
                          [0, 0, 1], [1, 0, 1], [2, 0, 1], [1, 1, 1]], dtype=float)
        quads = [[0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]]
        conn = build_connectivity(QuadMesh(verts, quads))
        f = verts[:, :1] * 1.0
        out = uniform_laplacian_apply(conn, np.concatenate([f, f * 0, f * 0], axis=1))
        # vertex 0 neighbors along the band: 1, 3 (x=1,1) and 4 (x=0)
        nbrs = conn.vertex_neighbors(0)
        expect = f[nbrs, 0].mean() - f[0, 0]
        assert out[0, 0] == pytest.approx(expect)

    def test_linearity(self, rng):
        conn = build_connectivity(random_closed_mesh(rng))
        f = rng.standard_normal((conn.n_vertices, 3))
        g = rng.standard_normal((conn.n_vertices, 3))
        lhs = uniform_laplacian_apply(conn, 2.0 * f - 0.5 * g)
        rhs = 2.0 * uniform_laplacian_apply(conn, f) \
            - 0.5 * uniform_laplacian_apply(conn, g)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_isolated_vertex_raises(self):
        verts = np.vstack([np.eye(4, 3), [5.0, 5.0, 5.0]])
        conn_mesh = QuadMesh(verts, [[0, 1, 2, 3]])
        conn = build_connectivity(conn_mesh)
        with pytest.raises(IsolatedVertex):
            uniform_laplacian_apply(conn, np.zeros((5, 3)))

    def test_field_length_mismatch(self):
        conn = build_connectivity(cube_mesh())
        with pytest.raises(TopologyMismatch):
            uniform_laplacian_apply(conn, np.zeros((5, 3)))


class TestEdgeLengthEnergy:
    def test_zero_at_reference(self, rng):
        mesh = random_closed_mesh(rng)
        e, g = edge_length_energy_mesh(mesh, mesh)
        assert e == 0.0
        assert np.allclose(g, 0.0)

    def test_cube_uniform_scale(self):
        cube = cube_mesh()
        e, _ = edge_length_energy_mesh(cube.with_vertices(2.0 * cube.vertices), cube)
        assert e == pytest.approx(12.0, rel=1e-12)

    def test_gradient_matches_fd(self, rng):
        grid = quad_grid(3, 3)
        ref = grid.vertices.copy()
        v = ref + 0.1 * rng.standard_normal(ref.shape)
        conn = build_connectivity(grid)
        _, g = edge_length_energy(v, ref, conn.edges)
        h = 1e-6
        fd = np.zeros_like(g)
        for i in range(v.shape[0]):
            for k in range(3):
                vp, vm = v.copy(), v.copy()
                vp[i, k] += h
                vm[i, k] -= h
                fd[i, k] = (edge_length_energy(vp, ref, conn.edges)[0]
                            - edge_length_energy(vm, ref, conn.edges)[0]) / (2 * h)
        assert np.abs(g - fd).max() / np.abs(fd).max() < 1e-6

    def test_topology_mismatch(self):
        with pytest.raises(TopologyMismatch):
            edge_length_energy_mesh(cube_mesh(), torus_mesh(4, 4))
