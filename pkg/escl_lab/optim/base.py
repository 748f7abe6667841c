import numpy as np

from ..exceptions import ConfigError


class Optimizer(object):
    """ Abstract optimizer.

    Optimizers are stateless objects; their running state is a plain dict
    (``{'t': steps taken, <slot>: {param name: array}}``) handed in and
    returned by ``step`` so it can be checkpointed.
    """

    slots = ()

    def __init__(self, config):
        self.learning_rate = float(config.learning_rate)
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigError("learning_rate must be non-negative, got %r"
                              % (config.learning_rate,))

    def init_state(self, params):
        state = {'t': 0}
        for slot in self.slots:
            state[slot] = dict((name, np.zeros_like(arr))
                               for name, arr in params.as_dict().items())
        return state

    def step(self, params, grads, state):
        """Return ``(new params, new state)``; inputs are left untouched."""
        raise NotImplementedError
