"""Models for the recorded trajectory steps."""

from scrapy.item import Item, Field

from .formats import format_float, format_vector


def _flag(value):
    return "1" if value else "0"


def _optional_float(value):
    return "" if value is None else format_float(value)


class TrajectoryStep(Item):
    """One controller period of a run."""

    step = Field()
    time = Field(serializer=format_float)

    q = Field(serializer=format_vector)
    x_m = Field(serializer=format_vector)
    x_d = Field(serializer=format_vector)

    goal_error = Field(serializer=format_float)
    min_clearance = Field(serializer=_optional_float)

    avoidance_active = Field(serializer=_flag)


class PathPoint(Item):
    """End-effector position at one step, for the path plot."""

    step = Field()
    x = Field(serializer=format_float)
    y = Field(serializer=format_float)
    z = Field(serializer=format_float)


class ErrorSample(Item):
    step = Field()
    goal_error = Field(serializer=format_float)


class ClearanceSample(Item):
    step = Field()
    min_clearance = Field(serializer=_optional_float)
