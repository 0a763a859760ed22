import math
import time

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from geolab.errors import CertificationError, EmptyInputError, GuardrailExceeded, UndefinedRegimeError
from geolab.geom import LineNF, Point2, PointSet, Scale, Tube, TubeSet
from geolab.incidence import (
    count_bruteforce, count_indexed, fu_ren_check, fu_ren_kappa, heavy_tubes,
    incidence_oracle_pair, points_in_tube, two_ends_test,
)
from geolab.regularity import concentration_profile, tube_concentration_profile
from geolab.setgen import gen_tube_net


def grid(k):
    g = np.arange(2 ** k) * 2.0 ** -k
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return PointSet(Scale(k), np.column_stack([gx.ravel(), gy.ravel()]))


def random_instance(n_points, n_tubes, k, seed):
    rng = np.random.default_rng(seed)
    P = PointSet(Scale(k), rng.uniform(-1, 1, (n_points, 2)), check_separation=False)
    T = TubeSet(Scale(k), rng.uniform(0, math.pi, n_tubes), rng.uniform(-1.2, 1.2, n_tubes))
    return P, T


class CountTests(SimpleTestCase):
    P = PointSet(Scale(2), [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]])

    def test_diagonal(self):
        line = LineNF.through(Point2(0, 0), Point2(1, 1))
        T = TubeSet(Scale(2), [line.phi], [line.c], w=0.01)
        self.assertEqual(count_bruteforce(self.P, T).total, 3)
        self.assertEqual(count_indexed(self.P, T).total, 3)

    def test_horizontal(self):
        T = TubeSet(Scale(2), [math.pi / 2], [0.0], w=0.01)
        self.assertEqual(count_bruteforce(self.P, T).total, 1)
        self.assertEqual(count_indexed(self.P, T).total, 1)

    def test_sin_tubos(self):
        T = TubeSet(Scale(2), [], [])
        self.assertEqual(count_bruteforce(self.P, T).total, 0)
        self.assertEqual(count_indexed(self.P, T).total, 0)

    def test_equivalencia_con_el_oraculo(self):
        P, T = random_instance(2000, 500, 8, seed=1)
        brute = count_bruteforce(P, T)
        for workers in (1, 4):
            fast = count_indexed(P, T, workers=workers)
            np.testing.assert_array_equal(fast.per_tube, brute.per_tube)
            self.assertEqual(fast.total, brute.total)

    def test_equivalencia_tubos_anchos(self):
        P, T = random_instance(300, 200, 6, seed=2)
        T = TubeSet(T.delta, T.phi, T.c, w=0.3)
        np.testing.assert_array_equal(count_indexed(P, T).per_tube, count_bruteforce(P, T).per_tube)

    def test_red_cubre_la_reticula(self):
        P = grid(4)
        self.assertGreaterEqual(count_indexed(P, gen_tube_net(2.0 ** -4)).total, len(P))

    def test_tubos_fuera(self):
        P = grid(4)
        T = TubeSet(Scale(4), np.linspace(0, 3, 10), np.full(10, 4.0))
        self.assertEqual(count_indexed(P, T).total, 0)

    def test_escala_fina_dispersa(self):
        # dos puntos en esquinas opuestas: la retícula densa tendría ~2^34 celdas
        P = PointSet(Scale(16), [[0.0, 0.0], [0.999, 0.999]])
        line = LineNF.through(Point2(0, 0), Point2(0.999, 0.999))
        T = TubeSet(Scale(16), [line.phi, 0.3, math.pi / 2], [line.c, 0.0, 0.999])
        fast = count_indexed(P, T)
        np.testing.assert_array_equal(fast.per_tube, count_bruteforce(P, T).per_tube)
        self.assertEqual(fast.per_tube[0], 2)

    def test_monotonia(self):
        P, T = random_instance(200, 50, 6, seed=3)
        base = count_indexed(P, T).total
        more = PointSet(P.delta, np.vstack([P.xy, [[0.0, 0.0]]]), check_separation=False)
        self.assertGreaterEqual(count_indexed(more, T).total, base)
        self.assertGreaterEqual(count_indexed(P, T.union(T.subset([0]))).total, base)

    def test_primitiva_escalar(self):
        P, T = random_instance(50, 20, 5, seed=4)
        per_tube = count_bruteforce(P, T).per_tube
        for i, tube in enumerate(T.tubes):
            hits = sum(incidence_oracle_pair(p, tube) for p in P.points)
            self.assertEqual(hits, per_tube[i])
            self.assertEqual(len(points_in_tube(P, tube)), per_tube[i])

    @override_settings(DGL={"GUARDRAIL_TESTS": 10})
    def test_guardrail(self):
        P, T = random_instance(100, 100, 5, seed=5)
        with self.assertRaises(GuardrailExceeded):
            count_bruteforce(P, T)


@tag("slow")
class IndexedAtScaleTests(SimpleTestCase):
    def test_oraculo_en_cincuenta_instancias(self):
        rng = np.random.default_rng(20)
        start = time.perf_counter()
        for i in range(50):
            k = (6, 8, 10)[i % 3]
            n_points, n_tubes = int(rng.integers(100, 2001)), int(rng.integers(10, 501))
            P, T = random_instance(n_points, n_tubes, k, seed=100 + i)
            np.testing.assert_array_equal(count_indexed(P, T).per_tube, count_bruteforce(P, T).per_tube)
        self.assertLess(time.perf_counter() - start, 60.0)

    def test_cien_mil_puntos_diez_mil_tubos(self):
        P, T = random_instance(10 ** 5, 10 ** 4, 10, seed=21)
        start = time.perf_counter()
        report = count_indexed(P, T)
        elapsed = time.perf_counter() - start
        self.assertEqual(len(report.per_tube), 10 ** 4)
        # holgura sobre los 5 s de un escritorio de 4 núcleos
        self.assertLess(elapsed, 20.0)
        sample = T.subset(np.arange(0, 10 ** 4, 500))
        np.testing.assert_array_equal(count_bruteforce(P, sample).per_tube, report.per_tube[::500])


class FuRenTests(SimpleTestCase):
    def test_kappa(self):
        self.assertEqual(fu_ren_kappa(1, 1), 0.5)
        self.assertAlmostEqual(fu_ren_kappa(1.5, 2), 0.4)
        self.assertEqual(fu_ren_kappa(0.5, 1), 0.5)

    def test_regimen_indefinido(self):
        with self.assertRaises(UndefinedRegimeError):
            fu_ren_kappa(0.5, 0.5)
        with self.assertRaises(UndefinedRegimeError):
            fu_ren_kappa(2.5, 1)

    def test_reticula_contra_red(self):
        k = 4
        P = grid(k)
        net = gen_tube_net(2.0 ** -k)
        T = TubeSet(P.delta, net.phi, net.c)
        epsP = max(0.0, math.log2(concentration_profile(P, 2.0).C_star) / k)
        epsT = max(0.0, math.log2(tube_concentration_profile(T, 2.0).C_star) / k)
        report = fu_ren_check(P, T, 2.0, 2.0, epsP, epsT)
        self.assertAlmostEqual(report.kappa, 1 / 3)
        self.assertFalse(report.violation)
        self.assertGreaterEqual(report.margin, 0.0)
        self.assertEqual(set(report.certificates), {"P", "T"})

    def test_sin_puntos(self):
        P = PointSet(Scale(4), np.empty((0, 2)))
        T = TubeSet(Scale(4), [0.5], [0.0])
        report = fu_ren_check(P, T, 1.0, 1.0, 0.0, 0.0, certify=False)
        self.assertEqual(report.total, 0)
        self.assertFalse(report.violation)
        self.assertIsNone(report.margin)

    def test_certificado_rechaza_puntos_alineados(self):
        x = np.arange(64) / 64
        P = PointSet(Scale(6), np.column_stack([x, np.zeros_like(x)]))
        T = TubeSet(Scale(6), [math.pi / 2], [0.0])
        with self.assertRaises(CertificationError) as ctx:
            fu_ren_check(P, T, 2.0, 1.0, 0.1, 0.1)
        self.assertIsNotNone(ctx.exception.profile)


class HeavyTubesTests(SimpleTestCase):
    def setUp(self):
        self.P, self.T = random_instance(256, 80, 8, seed=6)

    def test_umbral_inalcanzable(self):
        self.assertEqual(len(heavy_tubes(self.P, self.T, -1.0, 0.0)), 0)

    def test_umbral_uno(self):
        # δ^(σ+ε)·|P| = 2^-8 · 256 = 1
        heavy = heavy_tubes(self.P, self.T, 1.0, 0.0)
        expected = int(np.count_nonzero(count_indexed(self.P, self.T).per_tube >= 1))
        self.assertEqual(len(heavy), expected)


class TwoEndsTests(SimpleTestCase):
    def test_equiespaciados(self):
        x = np.arange(64) * 2.0 ** -6
        P = PointSet(Scale(6), np.column_stack([x, np.zeros_like(x)]))
        result = two_ends_test(P, 1 / 8)
        self.assertFalse(result.concentrated)
        self.assertEqual(result.needed, 22)

    def _cluster(self, cx, cy):
        d = 2.0 ** -8
        gx, gy = np.meshgrid(np.arange(8) * d, np.arange(4) * d, indexing="ij")
        return np.column_stack([gx.ravel() + cx, gy.ravel() + cy])

    def test_dos_extremos(self):
        xy = np.vstack([self._cluster(-0.9, 0.0), self._cluster(0.875, 0.0)])
        result = two_ends_test(PointSet(Scale(8), xy), 1 / 16)
        self.assertTrue(result.concentrated)
        self.assertGreaterEqual(result.count, 32)

    def test_un_grupo(self):
        self.assertTrue(two_ends_test(PointSet(Scale(8), self._cluster(0.0, 0.0)), 1 / 16).concentrated)

    def test_vacio(self):
        with self.assertRaises(EmptyInputError):
            two_ends_test(PointSet(Scale(4), np.empty((0, 2))), 0.1)

    def test_tubo_contiene_su_eje(self):
        tube = Tube(LineNF(0.0, 0.25), 2.0 ** -6)
        P = PointSet(Scale(6), [[0.25, -0.5], [0.25, 0.5], [0.5, 0.5]])
        self.assertEqual(len(points_in_tube(P, tube)), 2)
