from .base import Optimizer


class SGD(Optimizer):
    """ Plain gradient descent with a fixed learning rate.
    """

    def step(self, params, grads, state):
        updated = dict((name, arr - self.learning_rate * grads[name])
                       for name, arr in params.as_dict().items())
        return params.replace(**updated), {'t': state['t'] + 1}
