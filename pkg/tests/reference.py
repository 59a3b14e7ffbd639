"""The coupled two-component reference problem shared by the HUM tests."""
import numpy as np

from fictitious_control import CoupledSystem
from fictitious_control.carleman import WeightConfig, build_cutoffs, build_eta0, build_weights
from fictitious_control.hum import HumProblem
from fictitious_control.pde import Grid

D_REF = (0.5, 0.4)
G_REF = np.array([[0.0, 0.5], [-0.5, 0.0]])
A_REF = np.array([[0.5, 1.0], [-1.0, 0.3]])
T_REF = 0.5


def reference_system():
    return CoupledSystem.one_dimensional(D_REF, G_REF, A_REF, 2, T=T_REF)


def reference_grid(Nx=100, Nt=200):
    return Grid(Nx=Nx, Nt=Nt, T=T_REF)


def reference_problem(Nx=100, Nt=200, p=0):
    sys = reference_system()
    grid = reference_grid(Nx, Nt)
    cut = build_cutoffs(sys.omega, p, dx=grid.dx)
    eta = build_eta0(sys.L, cut.omegas[-1], p)
    w = build_weights(WeightConfig(p=p), eta, sys.T)
    return HumProblem.build(sys, grid, w, cut)


def reference_y0(grid):
    s = np.sin(np.pi * grid.x)
    return np.vstack([s, 0.5 * s])
