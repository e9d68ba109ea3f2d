"""Fixed desk-scale setups shared by module tests and the acceptance suite."""
import numpy as np

from zkl.data import synth_blobs
from zkl.dynamics import DynamicsDecomposition, actual_dynamics, belief_update_matrix, predict_dynamics
from zkl.kernel import fo_entk, zo_entk
from zkl.model import MlpConfig, forward_logits, grad_loss_logits, grad_loss_params, init_params, jacobian_logits, loss_ce, softmax
from zkl.optim import OptimConfig, fo_sgd_step, zo_sgd_step


class OneStep:
    """Default net, update on example 0 (class 0), observe example 15 (class 1)."""

    def __init__(self, P=16, mu=1e-5, dist="gaussian", seed=0):
        self.cfg = MlpConfig()
        self.theta = init_params(self.cfg)
        ds = synth_blobs(10, 64, 10, 4.0, 0)
        self.x_u, self.y_u = ds.inputs[0], int(ds.labels[0])
        self.x_o = ds.inputs[15]
        self.P, self.mu, self.dist, self.seed = P, mu, dist, seed
        self.J_o = jacobian_logits(self.theta, self.cfg, self.x_o)
        self.J_u = jacobian_logits(self.theta, self.cfg, self.x_u)
        self.G = grad_loss_logits(forward_logits(self.theta, self.cfg, self.x_u), self.y_u)
        self.A = belief_update_matrix(softmax(forward_logits(self.theta, self.cfg, self.x_o)))
        self.K_fo = fo_entk(self.J_o, self.J_u)

    def loss(self, theta):
        return loss_ce(forward_logits(theta, self.cfg, self.x_u), self.y_u)

    def fo(self, eta):
        """(predicted, actual) change of log-beliefs on x_o after one FO step."""
        grad = grad_loss_params(self.theta, self.cfg, self.x_u, self.y_u)
        after = fo_sgd_step(self.theta, grad, eta)
        pred = predict_dynamics(DynamicsDecomposition(self.A, self.K_fo, self.G, eta))
        return pred, actual_dynamics(self.theta, after, self.cfg, self.x_o)

    def zo(self, eta):
        """Same for one ZO step; the prediction uses the kernel of the step's own U."""
        ocfg = OptimConfig(eta=eta, mu=self.mu, P=self.P, distribution=self.dist, master_seed=self.seed)
        after, U = zo_sgd_step(self.loss, self.theta, ocfg, 0)
        K_zo = zo_entk(self.J_o, self.J_u, U)
        pred = predict_dynamics(DynamicsDecomposition(self.A, K_zo, self.G, eta))
        return pred, actual_dynamics(self.theta, after, self.cfg, self.x_o), K_zo
