import numpy as np
from django.test import SimpleTestCase, tag

from geolab.decompose import (
    Decomposition, build_ball_cover, cover_concentration, degree_bound, group_size,
    katz_tao_decompose, katz_tao_decompose_tubes, tube_cover_concentration, verify_decomposition,
)
from geolab.errors import DegenerateInputError, ScaleError
from geolab.geom import Scale
from geolab.setgen import CantorSpec, gen_cantor_product, gen_random_frostman, gen_random_tubes


def cantor_plane(k):
    spec = CantorSpec(4, (0, 3), k // 2)
    return gen_cantor_product(spec, spec, Scale(k))


class BallCoverTests(SimpleTestCase):
    def test_radio_grueso(self):
        self.assertLessEqual(build_ball_cover(2.0).size, 16)

    def test_radio_fuera_de_rango(self):
        with self.assertRaises(ScaleError):
            build_ball_cover(3.0)
        with self.assertRaises(ScaleError):
            build_ball_cover(0.0)

    def test_membresias_como_fuerza_bruta(self):
        cover = build_ball_cover(0.25)
        xy = np.random.default_rng(3).uniform(-1, 1, (200, 2))
        pts, keys = cover.memberships(xy)
        got = set(zip(pts.tolist(), keys.tolist()))
        centers = cover.centers
        dist = np.hypot(xy[:, None, 0] - centers[None, :, 0], xy[:, None, 1] - centers[None, :, 1])
        i, j = np.nonzero(dist <= cover.r)
        self.assertEqual(got, set(zip(i.tolist(), j.tolist())))

    def test_contencion_de_bolas(self):
        cover = build_ball_cover(0.5)
        centers = cover.centers
        rng = np.random.default_rng(4)
        for x in rng.uniform(-0.75, 0.75, (100, 2)):
            # B(x, 1/4) ⊂ B(c, 1/2) si |x − c| ≤ 1/4
            self.assertLessEqual(np.min(np.hypot(*(centers - x).T)), 0.25)

    def test_solapamiento(self):
        cover = build_ball_cover(0.125)
        g = np.linspace(-1, 1, 41)
        gx, gy = np.meshgrid(g, g)
        pts, _ = cover.memberships(np.column_stack([gx.ravel(), gy.ravel()]))
        self.assertLessEqual(np.bincount(pts).max(), 64)
        self.assertEqual(len(np.unique(pts)), gx.size)


class GroupSizeTests(SimpleTestCase):
    def test_ejemplo(self):
        self.assertEqual(group_size(1024, 2.0 ** -10, 1.0, 1.0), 16)

    def test_demasiado_disperso(self):
        with self.assertRaises(DegenerateInputError):
            group_size(4, 2.0 ** -10, 1.0, 1.0)


class DecomposeTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.P = cantor_plane(8)
        cls.C = cover_concentration(cls.P, 1.0)
        cls.D = katz_tao_decompose(cls.P, 1.0, cls.C)

    def test_partes_katz_tao(self):
        self.assertTrue(all(c <= 4.0 for c in self.D.certificates))
        report = verify_decomposition(self.D, self.P, 1.0, eps=0.1)
        self.assertTrue(report.passed, report.failures)
        self.assertLessEqual(report.worst_C, report.c0)

    def test_cadena_y_grado(self):
        self.assertTrue(self.D.chain_ok)
        self.assertEqual(self.D.chain_violations, 0)
        self.assertLessEqual(self.D.max_degree, degree_bound(self.D.H, self.P.delta.value))
        self.assertLessEqual(self.D.N, self.D.max_degree + 1)

    def test_particion_exacta(self):
        idx = np.sort(np.concatenate(self.D.indices))
        np.testing.assert_array_equal(idx, np.arange(len(self.P)))

    def test_determinista(self):
        again = katz_tao_decompose(self.P, 1.0, self.C)
        self.assertEqual([i.tolist() for i in again.indices], [i.tolist() for i in self.D.indices])

    def test_partes_fusionadas_siguen_disjuntas(self):
        if self.D.N < 2:
            self.skipTest("una sola parte")
        merged = [np.concatenate(self.D.indices[:2])] + self.D.indices[2:]
        bad = Decomposition(self.P, merged, 1.0, self.C, self.D.H, 0, 0)
        report = verify_decomposition(bad, self.P, 1.0)
        self.assertTrue(report.disjoint)
        self.assertTrue(report.union_ok)

    def test_sin_partes(self):
        empty = Decomposition(self.P, [], 1.0, self.C, self.D.H, 0, 0)
        report = verify_decomposition(empty, self.P, 1.0)
        self.assertFalse(report.union_ok)
        self.assertFalse(report.passed)

    def test_puntos_repetidos(self):
        dup = Decomposition(self.P, [np.arange(len(self.P)), np.array([0])], 1.0, self.C, self.D.H, 0, 0)
        report = verify_decomposition(dup, self.P, 1.0)
        self.assertFalse(report.disjoint)

    def test_entrada_pequena(self):
        P = gen_random_frostman(Scale(5), 1.0, seed=1)
        D = katz_tao_decompose(P, 1.0, cover_concentration(P, 1.0))
        self.assertTrue(verify_decomposition(D, P, 1.0).passed)


@tag("slow")
class DecomposeAtScaleTests(SimpleTestCase):
    def test_cantor_en_tres_escalas(self):
        for k in (6, 8, 10):
            with self.subTest(k=k):
                P = cantor_plane(k)
                C = cover_concentration(P, 1.0)
                D = katz_tao_decompose(P, 1.0, C)
                report = verify_decomposition(D, P, 1.0, eps=0.1)
                self.assertTrue(report.disjoint)
                self.assertTrue(report.union_ok)
                self.assertLessEqual(report.worst_C, 4.0)
                self.assertTrue(report.passed, report.failures)
                self.assertEqual(D.H, group_size(len(P), P.delta.value, 1.0, C))
                # N ≤ C|P|δ^0.9 se informa; no decide el veredicto
                self.assertAlmostEqual(report.count_bound, C * len(P) * P.delta.value ** 0.9)
                self.assertEqual(report.count_bound_ok, D.N <= report.count_bound)


class DecomposeTubesTests(SimpleTestCase):
    def test_tubos_aleatorios(self):
        T = gen_random_tubes(Scale(5), 1.0, seed=3)
        D = katz_tao_decompose_tubes(T, 1.0, tube_cover_concentration(T, 1.0))
        self.assertTrue(all(c <= 4.0 for c in D.certificates))
        self.assertEqual(sum(len(i) for i in D.indices), len(T))

    def test_verificacion_de_tubos(self):
        T = gen_random_tubes(Scale(5), 1.0, seed=3)
        D = katz_tao_decompose_tubes(T, 1.0, tube_cover_concentration(T, 1.0))
        report = verify_decomposition(D, T, 1.0)
        self.assertTrue(report.disjoint)
        self.assertTrue(report.union_ok)
        self.assertTrue(report.passed, report.failures)
        self.assertAlmostEqual(report.worst_C, max(D.certificates))

    def test_verificacion_de_tubos_detecta_faltantes(self):
        T = gen_random_tubes(Scale(5), 1.0, seed=3)
        D = katz_tao_decompose_tubes(T, 1.0, tube_cover_concentration(T, 1.0))
        short = Decomposition(T, D.indices[1:], 1.0, D.C, D.H, 0, 0)
        self.assertFalse(verify_decomposition(short, T, 1.0).union_ok)
