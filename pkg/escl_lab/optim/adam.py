import numpy as np

from ..exceptions import ConfigError
from .base import Optimizer


class Adam(Optimizer):
    """ Adam with bias correction and a fixed learning rate.
    """

    slots = ('m', 'v')

    def __init__(self, config):
        super(Adam, self).__init__(config)
        self.beta1 = float(config.adam_beta1)
        self.beta2 = float(config.adam_beta2)
        self.eps = float(config.adam_eps)
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1), got %r and %r"
                              % (self.beta1, self.beta2))
        if not self.eps > 0:
            raise ConfigError("adam_eps must be positive, got %r" % self.eps)

    def step(self, params, grads, state):
        t = state['t'] + 1
        m, v, updated = {}, {}, {}
        for name, arr in params.as_dict().items():
            g = grads[name]
            m[name] = self.beta1 * state['m'][name] + (1.0 - self.beta1) * g
            v[name] = self.beta2 * state['v'][name] + (1.0 - self.beta2) * g * g
            m_hat = m[name] / (1.0 - self.beta1 ** t)
            v_hat = v[name] / (1.0 - self.beta2 ** t)
            updated[name] = arr - self.learning_rate * (
                m_hat / (np.sqrt(v_hat) + self.eps))
        return params.replace(**updated), {'t': t, 'm': m, 'v': v}
