"""Exception hierarchy shared by every subsystem."""


class MobileChargerError(Exception):
    pass


class Unreachable(MobileChargerError):
    """Target lies outside the actuator's reach or servo limits."""


class NoIntersection(MobileChargerError):
    """Forward kinematics: the three distal spheres do not meet."""


class AllHoles(MobileChargerError):
    pass


class InvalidState(MobileChargerError):
    pass


class OutOfRange(MobileChargerError):
    pass


class ShapeMismatch(MobileChargerError):
    pass


class Diverged(MobileChargerError):
    pass


class WrongKind(MobileChargerError):
    pass


class DegenerateInput(MobileChargerError):
    pass


class ConfigError(MobileChargerError):
    pass
