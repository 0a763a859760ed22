import math
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from geolab.conf import dgl
from geolab.errors import DegenerateInputError, EmptyInputError, FloorError, UnrepresentableLineError
from geolab.geom import LineNF, Point2, PointSet, Scale, TubeSet, point_line_dist
from geolab.incidence import count_bruteforce
from geolab.projections import (
    DualPoint, SlopeLine, best_viewpoint, direction_set, dual_configuration, dual_incidence,
    dualize_line, dualize_point, flattening_preserves_lines, is_collinear, needs_pre_rotation,
    projection_covering, projective_flatten, radial_project, rotate, rotate_tubes, spanned_lines,
)

TRIANGLE = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]


def on_x_axis(k, lo=-1.0, hi=1.0):
    d = 2.0 ** -k
    x = np.arange(round(lo / d), round(hi / d) + 1) * d
    return PointSet(Scale(k), np.column_stack([x, np.zeros_like(x)]))


class RadialProjectionTests(SimpleTestCase):
    def test_ejes(self):
        Y = PointSet(Scale(2), [[1.0, 0.0], [0.0, 1.0]])
        angles = sorted(radial_project(Point2(0, 0), Y).angles.tolist())
        self.assertAlmostEqual(angles[0], 0.0)
        self.assertAlmostEqual(angles[1], math.pi / 2)

    def test_excluye_al_punto_de_vista(self):
        Y = PointSet(Scale(2), TRIANGLE)
        self.assertEqual(len(radial_project(Point2(0, 0), Y)), 2)
        with self.assertRaises(EmptyInputError):
            radial_project(Point2(0, 0), PointSet(Scale(2), [[0.0, 0.0]]))

    def test_una_direccion(self):
        Y = PointSet(Scale(3), [[0.5, 0.0], [0.75, 0.0]])
        self.assertEqual(projection_covering(Point2(0, 0), Y, 0.125), 1)

    def test_segmento_vertical(self):
        k = 6
        y = np.arange(2 ** k) * 2.0 ** -k
        Y = PointSet(Scale(k), np.column_stack([np.zeros_like(y), y]))
        d = radial_project(Point2(1, 0), Y)
        self.assertGreaterEqual(d.angles.min(), 3 * math.pi / 4 - 1e-12)
        self.assertLessEqual(d.angles.max(), math.pi + 1e-12)
        expected = math.ceil(math.atan(y[-1]) / 2.0 ** -k)
        self.assertLessEqual(abs(projection_covering(Point2(1, 0), Y, 2.0 ** -k) - expected), 4)

    def test_circulo_completo(self):
        r = 2.0 ** -4
        theta = np.arange(0, 2 * math.pi, r / 4)
        Y = PointSet(Scale(8), 0.5 * np.column_stack([np.cos(theta), np.sin(theta)]),
                     check_separation=False)
        n = projection_covering(Point2(0, 0), Y, r)
        self.assertLessEqual(abs(n - 2 * math.pi / r), 2)


class ViewpointTests(SimpleTestCase):
    def test_un_solo_punto(self):
        X = PointSet(Scale(3), [[0.25, 0.5]])
        vp = best_viewpoint(X, PointSet(Scale(3), TRIANGLE), 0.25)
        self.assertEqual(vp.index, 0)
        self.assertEqual(vp.point, Point2(0.25, 0.5))

    def test_colineales(self):
        Y = on_x_axis(5)
        X = PointSet(Scale(5), [[0.1, 0.0], [0.3, 0.0]])
        self.assertEqual(best_viewpoint(X, Y, 2.0 ** -5).covering, 2)

    def test_invariante_por_permutacion(self):
        rng = np.random.default_rng(7)
        Y = PointSet(Scale(6), rng.uniform(-1, 1, (80, 2)), check_separation=False)
        X = PointSet(Scale(6), rng.uniform(-1, 1, (10, 2)), check_separation=False)
        shuffled = PointSet(Scale(6), Y.xy[rng.permutation(len(Y))], check_separation=False)
        self.assertEqual(best_viewpoint(X, Y, 2.0 ** -5), best_viewpoint(X, shuffled, 2.0 ** -5))


class DirectionSetTests(SimpleTestCase):
    def test_triangulo(self):
        ds, covering = direction_set(PointSet(Scale(2), TRIANGLE), 0.25)
        np.testing.assert_allclose(sorted(ds.angles), [0.0, math.pi / 2, 3 * math.pi / 4])
        self.assertEqual(covering, 3)
        self.assertFalse(ds.sampled)

    def test_colineales(self):
        self.assertEqual(direction_set(on_x_axis(4, 0, 1), 2.0 ** -4)[1], 1)

    def test_singleton(self):
        with self.assertRaises(DegenerateInputError):
            direction_set(PointSet(Scale(2), [[0.0, 0.0]]), 0.25)

    def test_reticula(self):
        k = 4
        g = np.arange(2 ** k) * 2.0 ** -k
        gx, gy = np.meshgrid(g, g, indexing="ij")
        X = PointSet(Scale(k), np.column_stack([gx.ravel(), gy.ravel()]))
        covering = direction_set(X, 2.0 ** -4)[1]
        self.assertGreaterEqual(covering, 0.9 * math.ceil(math.pi / 2.0 ** -4))
        self.assertLessEqual(covering, math.ceil(math.pi / 2.0 ** -4))

    @override_settings(DGL={"PAIR_CAP": 100})
    def test_muestreo_por_encima_del_tope(self):
        rng = np.random.default_rng(8)
        X = PointSet(Scale(6), rng.uniform(-1, 1, (40, 2)), check_separation=False)
        ds, covering = direction_set(X, 2.0 ** -6, seed=1)
        self.assertTrue(ds.sampled)
        self.assertEqual(covering, direction_set(X, 2.0 ** -6, seed=1)[1])


class SpannedLinesTests(SimpleTestCase):
    def test_triangulo(self):
        lines, covering = spanned_lines(PointSet(Scale(2), TRIANGLE), 0.25)
        self.assertEqual(len(lines), 3)
        self.assertEqual(covering, 3)

    def test_colineales(self):
        lines, covering = spanned_lines(on_x_axis(3, 0, 1), 0.125)
        self.assertEqual(len(lines), 1)
        self.assertEqual(covering, 1)

    def test_posicion_general(self):
        X = PointSet(Scale(6), np.random.default_rng(9).uniform(-1, 1, (12, 2)), check_separation=False)
        self.assertEqual(len(spanned_lines(X, 2.0 ** -6)[0]), 12 * 11 // 2)


class DualityTests(SimpleTestCase):
    def test_diagonal(self):
        l = dualize_point(Point2(1, 0))
        self.assertAlmostEqual(l.phi, 3 * math.pi / 4)
        self.assertAlmostEqual(l.c, 0.0)
        p = dualize_line(LineNF.through(Point2(0, 0), Point2(1, 1)))
        self.assertAlmostEqual(p.x, -1.0)
        self.assertAlmostEqual(p.y, 0.0)

    def test_ejemplo_exacto(self):
        line = SlopeLine(1, 1)
        self.assertTrue(line.contains((2, 3)))
        self.assertEqual(line.dual_point(), (Fraction(-1), Fraction(1)))
        self.assertTrue(SlopeLine.dual_of_point((2, 3)).contains((-1, 1)))
        self.assertTrue(dual_incidence((2, 3), line))
        self.assertFalse(dual_incidence((2, Fraction(31, 10)), line))

    def test_equivalencia_racional(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            c, d, a = (Fraction(int(n), int(m)) for n, m in zip(rng.integers(-50, 50, 3), rng.integers(1, 20, 3)))
            line = SlopeLine(c, d)
            b = c * a + d
            self.assertEqual(line.contains((a, b)), dual_incidence((a, b), line))
            self.assertTrue(dual_incidence((a, b), line))
            self.assertFalse(dual_incidence((a, b + Fraction(1, 7)), line))

    def test_equivalencia_flotante(self):
        rng = np.random.default_rng(11)
        tol = dgl("DUALITY_TOL")
        for slope, intercept, a in rng.uniform(-0.5, 0.5, (200, 3)):
            p = Point2(float(a), float(slope * a + intercept))
            line = LineNF.through(Point2(0.0, float(intercept)), Point2(1.0, float(slope + intercept)))
            self.assertLessEqual(point_line_dist(p, line), tol)
            self.assertLessEqual(point_line_dist(dualize_line(line), dualize_point(p)), tol)

    def test_ida_y_vuelta_refleja(self):
        q = dualize_line(dualize_point(Point2(0.5, 0.25)))
        self.assertAlmostEqual(q.x, -0.5)
        self.assertAlmostEqual(q.y, 0.25)

    def test_pendiente_fuera_de_la_caja(self):
        # y = 5x + 0.3: el dual (−5, 0.3) cae fuera de [-2, 2]² y aun así existe
        line = LineNF.through(Point2(0.0, 0.3), Point2(0.2, 1.3))
        q = dualize_line(line)
        self.assertIsInstance(q, DualPoint)
        self.assertAlmostEqual(q.x, -5.0)
        self.assertAlmostEqual(q.y, 0.3)
        p = Point2(0.1, 0.8)
        self.assertLessEqual(point_line_dist(q, dualize_point(p)), dgl("DUALITY_TOL"))
        self.assertAlmostEqual(dualize_point(q).c, 0.3 / math.sqrt(26))

    def test_recta_vertical(self):
        with self.assertRaises(UnrepresentableLineError):
            dualize_line(LineNF(0.0, 0.3))
        with self.assertRaises(UnrepresentableLineError):
            SlopeLine.from_normal_form(LineNF(0.0, 0.3))

    def test_transporte_de_incidencias(self):
        rng = np.random.default_rng(12)
        k = 6
        P = PointSet(Scale(k), rng.uniform(-1, 1, (300, 2)), check_separation=False)
        T = TubeSet(Scale(k), rng.uniform(math.pi / 4, 3 * math.pi / 4, 120), rng.uniform(-1, 1, 120))
        primal = count_bruteforce(P, T).total
        wide = dual_configuration(P, T, w=4 * T.w)
        narrow = dual_configuration(P, T, w=T.w / 4)
        self.assertEqual(wide.rotation, 0.0)
        self.assertGreaterEqual(count_bruteforce(wide.points, wide.tubes).total, primal)
        self.assertLessEqual(count_bruteforce(narrow.points, narrow.tubes).total, primal)
        self.assertTrue(np.all(np.abs(wide.points.xy) <= 1))

    def test_rotacion_previa(self):
        P = PointSet(Scale(4), [[0.25, 0.5]])
        T = TubeSet(Scale(4), [0.0, 1.0], [0.25, 0.0])
        self.assertTrue(needs_pre_rotation(T))
        dual = dual_configuration(P, T)
        self.assertEqual(dual.rotation, dgl("PRE_ROTATION"))
        self.assertEqual(count_bruteforce(dual.points, dual.tubes).total,
                         count_bruteforce(P, T).total)

    def test_rotar(self):
        P = rotate(PointSet(Scale(2), [[1.0, 0.0]]), math.pi / 2)
        np.testing.assert_allclose(P.xy, [[0.0, 1.0]], atol=1e-15)
        T = rotate_tubes(TubeSet(Scale(2), [3.0], [0.5]), 0.5)
        self.assertTrue(0 <= T.phi[0] < math.pi)
        self.assertAlmostEqual(T.c[0], -0.5)


@tag("slow")
class DualityFixturesTests(SimpleTestCase):
    n = 10 ** 4

    def test_racionales(self):
        rng = np.random.default_rng(30)
        nums, dens = rng.integers(-200, 200, (self.n, 3)), rng.integers(1, 50, (self.n, 3))
        for row_n, row_d in zip(nums, dens):
            c, d, a = (Fraction(int(p), int(q)) for p, q in zip(row_n, row_d))
            line = SlopeLine(c, d)
            self.assertTrue(dual_incidence((a, c * a + d), line))
            self.assertFalse(dual_incidence((a, c * a + d + Fraction(1, 997)), line))
            # reflexión exacta: D*(D(a, b)) = (−a, b)
            self.assertEqual(SlopeLine.dual_of_point((a, d)).dual_point(), (-a, d))

    def test_flotantes(self):
        rng = np.random.default_rng(31)
        tol = dgl("DUALITY_TOL")
        for slope, intercept, a in zip(rng.uniform(-1.5, 1.5, self.n), rng.uniform(-0.5, 0.5, self.n),
                                       rng.uniform(-1, 1, self.n)):
            p = Point2(float(a), float(slope * a + intercept))
            line = LineNF.through(Point2(0.0, float(intercept)), Point2(1.0, float(slope + intercept)))
            self.assertLessEqual(point_line_dist(dualize_line(line), dualize_point(p)), tol)
            q = dualize_line(dualize_point(p))
            self.assertAlmostEqual(q.x, -p.x, places=9)
            self.assertAlmostEqual(q.y, p.y, places=9)


class FlatteningTests(SimpleTestCase):
    def test_eje_vertical(self):
        P = PointSet(Scale(2), [[0.0, 0.5], [0.0, 1.0], [0.0, 2.0]], box=(-2, -2, 2, 2))
        F = projective_flatten(P, 0.1)
        np.testing.assert_allclose(F.xy, [[0.0, 1.0], [0.0, 0.5], [0.0, 0.25]])
        self.assertEqual(F.rebox.scale, 0.5)
        self.assertTrue(is_collinear(F))

    def test_rectas_por_el_eje(self):
        u = np.linspace(0.5, 3.0, 12)
        samples = np.column_stack([1 + u, u])
        self.assertTrue(flattening_preserves_lines(1.0, samples))
        self.assertFalse(flattening_preserves_lines(2.0, samples))
        self.assertTrue(flattening_preserves_lines(0.0, [[0, 1], [0, 2], [0, 4]]))

    def test_piso(self):
        P = PointSet(Scale(2), [[0.5, 0.0], [0.0, 1.0]])
        with self.assertRaises(FloorError):
            projective_flatten(P, 0.01)
        with self.assertRaises(FloorError):
            flattening_preserves_lines(0.0, [[0.0, 0.0], [0.0, 1.0]])

    def test_no_colineales(self):
        self.assertFalse(is_collinear(np.array(TRIANGLE)))
