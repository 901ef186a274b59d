# Step Pipelines

import json
import logging
import os

import numpy as np
from itemadapter import ItemAdapter

from scrapy.exporters import CsvItemExporter
from scrapy.utils.conf import build_component_list
from scrapy.utils.misc import load_object

from . import dq, log
from .exceptions import DropStep, SilentDropStep
from .items import ClearanceSample, ErrorSample, PathPoint

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
SUMMARY_FILE = "summary.json"
PATH_FILE = "path.csv"
ERROR_FILE = "error.csv"
CLEARANCE_FILE = "clearance.csv"
PLOT_SCRIPT = "plot_paths.py"


def position(values):
    """End-effector translation of a pose stored as its 8 coefficients."""

    return dq.translation(dq.DualQuaternion(values))


class RunPipeline:
    """Base class for pipelines that need access to the run.

    Provides from_runner() to store the run as self.run.
    """

    @classmethod
    def from_runner(cls, run):
        pipeline = cls()
        pipeline.run = run
        return pipeline

    def open_run(self):
        pass

    def process_item(self, item):
        return item

    def close_run(self):
        pass


class StepPipelineManager:
    """Runs every record through the STEP_PIPELINES, in ascending order."""

    def __init__(self, pipelines):
        self.pipelines = pipelines

    @classmethod
    def from_settings(cls, settings, run):
        pipelines = []
        for path in build_component_list(settings.getdict("STEP_PIPELINES")):
            pipeline_cls = load_object(path)
            if hasattr(pipeline_cls, "from_runner"):
                pipelines.append(pipeline_cls.from_runner(run))
            else:
                pipelines.append(pipeline_cls())
        logger.debug(f"Enabled step pipelines: {[type(p).__name__ for p in pipelines]}")
        return cls(pipelines)

    def open_run(self):
        for pipeline in self.pipelines:
            pipeline.open_run()

    def process_item(self, item):
        for pipeline in self.pipelines:
            try:
                item = pipeline.process_item(item)
            except DropStep as e:
                log.dropped(logger, item, e)
                return None
        return item

    def close_run(self):
        for pipeline in self.pipelines:
            pipeline.close_run()


class ClearancePipeline(RunPipeline):
    """Tracks the smallest obstacle clearance and flags penetrations."""

    def open_run(self):
        self.run.metrics["min_clearance"] = None
        self.run.metrics["collisions"] = 0

    def process_item(self, item):
        clearance = ItemAdapter(item).get("min_clearance")
        if clearance is None:
            return item

        metrics = self.run.metrics
        if metrics["min_clearance"] is None or clearance < metrics["min_clearance"]:
            metrics["min_clearance"] = clearance

        if clearance < 0.0:
            metrics["collisions"] += 1
            self.run.logger.warning(
                f"Step {item['step']}: end-effector inside an obstacle ({clearance:.3g} m)"
            )
        return item


class MetricsPipeline(RunPipeline):
    """Accumulates run metrics and writes the summary file."""

    def open_run(self):
        self.last_position = None
        self.run.metrics.update(
            {"steps": 0, "path_length": 0.0, "avoidance_steps": 0, "final_error": None}
        )

    def process_item(self, item):
        adapter = ItemAdapter(item)
        metrics = self.run.metrics

        current = position(adapter["x_m"])
        if self.last_position is not None:
            metrics["path_length"] += float(np.linalg.norm(current - self.last_position))
        self.last_position = current

        metrics["steps"] += 1
        metrics["final_error"] = adapter["goal_error"]
        if adapter["avoidance_active"]:
            metrics["avoidance_steps"] += 1
        return item

    def close_run(self):
        summary = {
            "status": self.run.status,
            "exit_code": self.run.exit_code,
            "config_hash": self.run.config_hash,
            "seed": self.run.seed,
            **self.run.metrics,
            "planner_step_time": _timing(self.run.planner_timings),
            "escape_level_time": _timing(self.run.level_timings),
        }
        path = os.path.join(self.run.output_dir, SUMMARY_FILE)
        with open(path, "w") as file:
            json.dump(summary, file, indent=2)
        self.run.summary = summary
        self.run.logger.info(f"Wrote {path}")


def _timing(samples):
    if not samples:
        return {"count": 0, "mean": None, "std": None}
    values = np.asarray(samples)
    return {
        "count": int(values.size),
        "mean": float(values.mean()),
        "std": float(values.std()),
    }


class CsvExportPipeline(RunPipeline):
    """Writes every step record to trajectory.csv with a fixed column order."""

    def open_run(self):
        fields = self.run.settings.getlist("CSV_FIELDS")
        path = os.path.join(self.run.output_dir, TRAJECTORY_FILE)
        self.file = open(path, "wb")
        self.exporter = CsvItemExporter(
            self.file, include_headers_line=False, fields_to_export=fields
        )
        self.exporter.start_exporting()
        # headers even for an empty run
        self.exporter.csv_writer.writerow(fields)

    def process_item(self, item):
        self.exporter.export_item(item)
        return item

    def close_run(self):
        self.exporter.finish_exporting()
        self.file.close()


class PlotDataPipeline(RunPipeline):
    """Keeps the records and emits plot data when the run closes."""

    def open_run(self):
        self.records = []

    def process_item(self, item):
        self.records.append(item)
        return item

    def close_run(self):
        emit_plots(self.records, self.run.output_dir)


class SkipDetourPipeline(RunPipeline):
    """Keeps detour steps out of the exports, for runs that only need the plan."""

    def process_item(self, item):
        if ItemAdapter(item).get("avoidance_active"):
            raise SilentDropStep("Detour step")
        return item


PLOT_TEMPLATE = '''"""Plots written next to the run outputs. Needs matplotlib."""

import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(HERE, name)) as file:
        return list(csv.DictReader(file))


def column(rows, key):
    return [float(r[key]) if r[key] != "" else float("nan") for r in rows]


path = read("{path}")
error = read("{error}")
clearance = read("{clearance}")

fig = plt.figure(figsize=(12, 4))

ax = fig.add_subplot(1, 3, 1, projection="3d")
ax.plot(column(path, "x"), column(path, "y"), column(path, "z"))
ax.set_title("End-effector path")

ax = fig.add_subplot(1, 3, 2)
ax.semilogy(column(error, "step"), column(error, "goal_error"))
ax.set_xlabel("step")
ax.set_title("Goal error")

ax = fig.add_subplot(1, 3, 3)
ax.plot(column(clearance, "step"), column(clearance, "min_clearance"))
ax.set_xlabel("step")
ax.set_title("Obstacle clearance (m)")

fig.tight_layout()
fig.savefig(os.path.join(HERE, "paths.png"))
'''


def export_csv(path, fields, items):
    """Write ``items`` through a CsvItemExporter, with a header line even when empty."""

    with open(path, "wb") as file:
        exporter = CsvItemExporter(file, include_headers_line=False, fields_to_export=fields)
        exporter.start_exporting()
        exporter.csv_writer.writerow(fields)
        for item in items:
            exporter.export_item(item)
        exporter.finish_exporting()


def emit_plots(records, output_dir):
    """Write path, error and clearance series plus a plotting script."""

    points, errors, clearances = [], [], []
    for item in records:
        adapter = ItemAdapter(item)
        step = adapter["step"]
        x, y, z = position(adapter["x_m"])
        points.append(PathPoint(step=step, x=x, y=y, z=z))
        errors.append(ErrorSample(step=step, goal_error=adapter["goal_error"]))
        clearances.append(ClearanceSample(step=step, min_clearance=adapter.get("min_clearance")))

    export_csv(os.path.join(output_dir, PATH_FILE), ["step", "x", "y", "z"], points)
    export_csv(os.path.join(output_dir, ERROR_FILE), ["step", "goal_error"], errors)
    export_csv(os.path.join(output_dir, CLEARANCE_FILE), ["step", "min_clearance"], clearances)

    with open(os.path.join(output_dir, PLOT_SCRIPT), "w") as file:
        file.write(
            PLOT_TEMPLATE.format(path=PATH_FILE, error=ERROR_FILE, clearance=CLEARANCE_FILE)
        )
