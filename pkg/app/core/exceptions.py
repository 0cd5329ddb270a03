"""
Domain exceptions raised by the simulation services
"""


class SimulationError(ValueError):
    """Base class for errors raised by the simulation domain"""


class GeometryDomainError(SimulationError):
    """A position lies outside the range of a route"""


class TopologyError(SimulationError):
    """Two vehicles are not on a connected forward path"""


class ContractViolation(SimulationError):
    """An operation was called with arguments outside its contract"""


class ScenarioConfigError(SimulationError):
    """A scenario document could not be resolved into a runnable configuration"""
