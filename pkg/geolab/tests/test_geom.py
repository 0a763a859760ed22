import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from geolab.errors import ScaleError
from geolab.geom import (
    LineNF, Point2, PointSet, Rebox, Scale, Tube, TubeSet, count_cells, covering_number,
    dyadic_radii, lattice_cells, line_cells, line_metric, tube_box_contained, tube_contains,
    tube_covering_number,
)


def grid(k):
    d = 2.0 ** -k
    g = np.arange(2 ** k) * d
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return PointSet(Scale(k), np.column_stack([gx.ravel(), gy.ravel()]))


class ScaleTests(SimpleTestCase):
    def test_value_y_texto(self):
        self.assertEqual(Scale(10).value, 2.0 ** -10)
        self.assertEqual(str(Scale(3)), "2^-3")

    def test_from_value_redondea_hacia_abajo(self):
        self.assertEqual(Scale.from_value(0.3).k, 2)
        self.assertEqual(Scale.from_value(0.25).k, 2)
        self.assertEqual(Scale.from_value(2.0 ** -7).k, 7)

    def test_from_value_fuera_de_rango(self):
        with self.assertRaises(ScaleError):
            Scale.from_value(0.6)
        with self.assertRaises(ScaleError):
            Scale.from_value(0.0)

    def test_k_invalido(self):
        with self.assertRaises(ValidationError):
            Scale(0)

    def test_radios_diadicos(self):
        self.assertEqual(dyadic_radii(Scale(3)), [(0, 1.0), (1, 0.5), (2, 0.25), (3, 0.125)])


class LineTests(SimpleTestCase):
    def test_from_angle_normaliza(self):
        l = LineNF.from_angle(3 * math.pi / 2, 1.0)
        self.assertAlmostEqual(l.phi, math.pi / 2)
        self.assertAlmostEqual(l.c, -1.0)

    def test_through_contiene_a_ambos_puntos(self):
        p, q = Point2(0.1, 0.2), Point2(-0.4, 0.7)
        T = Tube(LineNF.through(p, q), 1e-12)
        self.assertTrue(tube_contains(T, p))
        self.assertTrue(tube_contains(T, q))

    def test_fuera_de_rango(self):
        with self.assertRaises(ValidationError):
            LineNF(math.pi, 0.0)
        with self.assertRaises(ValidationError):
            LineNF(0.0, 5.0)
        with self.assertRaises(ValidationError):
            Tube(LineNF(0.0, 0.0), 0.0)

    def test_metrica_identifica_antipodas(self):
        self.assertEqual(line_metric(LineNF(0.3, 0.1), LineNF(0.3, 0.1)), 0.0)
        self.assertAlmostEqual(line_metric(LineNF(0.0, 0.5), LineNF(0.0, -0.5)), 1.0)
        # casi vertical por ambos lados del borde φ = 0 ≡ π
        near = line_metric(LineNF(1e-6, 0.2), LineNF(math.pi - 1e-6, -0.2))
        self.assertLess(near, 1e-5)

    def test_contencion_de_tubos_en_la_caja(self):
        thin = Tube(LineNF(0.0, 0.0), 0.1)
        wide = Tube(LineNF(0.0, 0.0), 0.2)
        self.assertTrue(tube_box_contained(thin, wide))
        self.assertFalse(tube_box_contained(wide, thin))


class SetTests(SimpleTestCase):
    def test_separacion(self):
        with self.assertRaises(ValidationError):
            PointSet(Scale(4), [[0.0, 0.0], [0.01, 0.0]])
        P = PointSet(Scale(4), [[0.0, 0.0], [0.01, 0.0]], check_separation=False)
        self.assertEqual(len(P), 2)

    def test_fuera_de_caja(self):
        with self.assertRaises(ValidationError):
            PointSet(Scale(2), [[1.5, 0.0]])

    def test_tubeset_semiancho_por_defecto(self):
        T = TubeSet(Scale(5), [0.0, 1.0], [0.0, 0.3])
        self.assertEqual(T.w, 2.0 ** -5)
        self.assertEqual(len(T.tubes), 2)
        with self.assertRaises(ValidationError):
            TubeSet(Scale(5), [3.5], [0.0])

    def test_subset_y_union(self):
        T = TubeSet(Scale(5), [0.0, 1.0, 2.0], [0.0, 0.3, -0.2])
        U = T.subset([0, 2]).union(T.subset([1]))
        self.assertEqual(len(U), 3)
        self.assertEqual(sorted(U.phi.tolist()), [0.0, 1.0, 2.0])


class CoveringTests(SimpleTestCase):
    def test_reticula_completa(self):
        P = grid(5)
        self.assertEqual(covering_number(P, 2.0 ** -5), 4 ** 5)
        self.assertEqual(covering_number(P, 2.0 ** -3), 4 ** 3)
        self.assertEqual(covering_number(P, 1.0), 1)

    def test_debajo_de_delta(self):
        with self.assertRaises(ScaleError):
            covering_number(grid(3), 2.0 ** -4)

    def test_celdas_desplazadas(self):
        xy = np.array([[0.0, 0.0], [0.3, 0.3]])
        self.assertEqual(count_cells(lattice_cells(xy, 0.5)), 1)
        self.assertEqual(count_cells(lattice_cells(xy, 0.5, (0.25, 0.25))), 2)

    def test_periodicidad_de_rectas(self):
        # φ ≈ π con c y φ ≈ 0 con −c son la misma celda
        cells = line_cells(np.array([math.pi - 1e-12, 0.0]), np.array([0.3, -0.3]), 0.25)
        self.assertEqual(count_cells(cells), 1)

    def test_recubrimiento_de_tubos(self):
        T = TubeSet(Scale(4), [0.0, 0.01, 1.5], [0.1, 0.1, 0.1])
        self.assertEqual(tube_covering_number(T, 0.25), 2)


class ReboxTests(SimpleTestCase):
    def test_fitting_potencia_de_dos(self):
        R = Rebox.fitting(np.array([[3.0, 0.0]]))
        self.assertEqual(R.scale, 0.25)
        self.assertEqual(Rebox.fitting(np.array([[0.5, 0.5]])).scale, 1.0)

    def test_compose(self):
        R = Rebox(2.0, (1.0, 0.0)).compose(Rebox(0.5, (0.0, 1.0)))
        np.testing.assert_allclose(R.apply(np.array([[1.0, 1.0]])), [[2.0, 3.0]])

    def test_apply_lines_conserva_incidencia(self):
        R = Rebox(0.5, (0.1, -0.2))
        phi, c = np.array([0.7]), np.array([0.3])
        p = np.array([[math.cos(0.7) * 0.3, math.sin(0.7) * 0.3]])
        q = R.apply(p)[0]
        c2 = R.apply_lines(phi, c)[0]
        self.assertAlmostEqual(q[0] * math.cos(0.7) + q[1] * math.sin(0.7), c2)
