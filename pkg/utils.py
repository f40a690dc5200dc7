# Shared utilities for the three-body Bose gas toolkit
# This module contains configuration, errors and report writers shared across all modules

import copy
import io
import json
import logging
import os
import platform
from datetime import datetime

import numpy as np
import pandas as pd
import scipy
from dotenv import load_dotenv
from reportlab.lib import colors
from reportlab.lib.enums import TA_LEFT
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

# Timezone support
try:
    from zoneinfo import ZoneInfo
    def get_utc_time():
        return datetime.now(ZoneInfo("UTC"))
except ImportError:
    from datetime import timezone
    def get_utc_time():
        return datetime.now(timezone.utc)

# -------------------------------
# Configuration Constants
# -------------------------------
__version__ = "0.3.0"
SCHEMA_VERSION = 1
CONFIG_FILE = "config.json"

load_dotenv()

DEFAULT_CONFIG = {
    "scattering": {
        "radius_multipliers": [4.0, 6.0, 8.0],
        "cells_per_range": 64,
        "orbit_cells_per_range": 6,
        "orbit_c_cells": 12,
        "cg_rtol": 1e-10,
        "cg_maxiter": 100000,
        "residual_tol": 1e-8,
    },
    "symmetry": {
        "samples": 10000,
        "rel_tol": 1e-10,
    },
    "dyson": {
        "tol": 1e-10,
        "c_eff_max": 10.0,
        "cells_per_range": 64,
    },
    "temple": {
        "epsilon": 0.1,
        "c_err": 1.0,
        "c_geom": 32.0 * np.pi / 3.0,
        "gap_sites": 64,
        "u_inner": 0.5,
        "u_outer": 1.5,
    },
    "diag": {
        "boundary": "neumann",
        "dense_limit": 500,
        "eigsh_tol": 0.0,
        "eigsh_maxiter": 20000,
    },
    "upper": {
        "cells_per_layer": 16,
        "eps_max": 0.4,
        "lemma_constant": None,
    },
    "runtime": {
        "mem_cap_bytes": int(os.getenv("BOSEGAS_MEM_CAP", str(8 * 1024**3))),
        "threads": int(os.getenv("BOSEGAS_THREADS", "1")),
        "log_level": os.getenv("BOSEGAS_LOG_LEVEL", "INFO"),
        "output_dir": os.getenv("BOSEGAS_OUTPUT_DIR", "."),
    },
}

# -------------------------------
# Errors
# -------------------------------
class BoseGasError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


class ConfigError(BoseGasError):
    """Invalid configuration, unknown command or unreadable input file"""
    exit_code = 1


class PreconditionError(BoseGasError):
    """An input violates a documented precondition"""
    exit_code = 2


class GridResolutionError(PreconditionError):
    pass


class GridMismatchError(PreconditionError):
    pass


class ParameterWindowError(PreconditionError):
    pass


class AsymmetricPotentialError(PreconditionError):
    pass


class PullbackError(PreconditionError):
    pass


class DimensionCapError(PreconditionError):
    pass


class CrossTermError(PreconditionError):
    pass


class IncompleteTableError(PreconditionError):
    pass


class SamplerError(PreconditionError):
    pass


class IllConditionedFitError(PreconditionError):
    pass


class ConvergenceError(BoseGasError):
    """An iterative solver did not reach its tolerance"""
    exit_code = 3

# -------------------------------
# Configuration Management
# -------------------------------
def deep_merge(base, override):
    """Return a copy of base with override merged in recursively"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path=None):
    """
    Load configuration from a JSON or TOML file merged over DEFAULT_CONFIG.

    Args:
        path: Config file. When None, CONFIG_FILE is tried and silently skipped
            if absent. An explicit path must exist and parse.

    Returns:
        dict: The resolved configuration.
    """
    explicit = path is not None
    path = path or CONFIG_FILE
    if not os.path.exists(path):
        if explicit:
            raise ConfigError(f"Config file not found: {path}")
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        if str(path).endswith(".toml"):
            with open(path, "rb") as f:
                user = tomllib.load(f)
        else:
            with open(path, "r") as f:
                user = json.load(f)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as e:
        if explicit:
            raise ConfigError(f"Error loading config {path}: {e}") from e
        logger.warning("Error loading config %s: %s; using defaults", path, e)
        return copy.deepcopy(DEFAULT_CONFIG)
    if not isinstance(user, dict):
        raise ConfigError(f"Config {path} must hold a mapping at top level")
    return deep_merge(DEFAULT_CONFIG, user)


def save_config(config, path=CONFIG_FILE):
    """Save configuration to JSON file"""
    try:
        with open(path, "w") as f:
            json.dump(config, f, indent=2, sort_keys=True)
        return True
    except OSError as e:
        logger.error("Error saving config: %s", e)
        return False

# -------------------------------
# Formatting Helpers
# -------------------------------
def to_jsonable(value):
    """Convert numpy scalars, arrays and dataclass-like objects to JSON types"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value) or np.isinf(value):
            return str(value)
        return value
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    return value


def format_number(value, digits=6):
    """Format a number for display - returns 'n/a' for anything non-numeric"""
    try:
        value = float(value)
    except (TypeError, ValueError):
        return "n/a"
    if np.isnan(value):
        return "n/a"
    return f"{value:.{digits}g}"


def runtime_versions():
    return {
        "toolkit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }

# -------------------------------
# Report Writers
# -------------------------------
def build_report(command, inputs, results, seed=None, csv_files=None, runtime_seconds=0.0):
    """Assemble the JSON report document for one CLI command"""
    return to_jsonable({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": inputs,
        "versions": runtime_versions(),
        "seed": seed,
        "results": results,
        "csv_files": csv_files or {},
        "timestamp": get_utc_time().isoformat(),
        "runtime_seconds": runtime_seconds,
    })


def write_json_report(report, path):
    """Write report to path with sorted keys; returns the path"""
    with open(path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_csv_tables(tables, out_stem):
    """
    Write each named DataFrame next to the report.

    Returns:
        dict: table name -> {"path", "columns"} for the report's csv_files entry.
    """
    written = {}
    for name, df in tables.items():
        path = f"{out_stem}_{name}.csv"
        df.to_csv(path, index=False)
        written[name] = {"path": path, "columns": list(df.columns)}
    return written


def summary_dataframe(results):
    """Flatten scalar results into a two-column Metric/Value frame"""
    rows = []

    def walk(prefix, value):
        if isinstance(value, dict):
            for k in sorted(value):
                walk(f"{prefix}.{k}" if prefix else str(k), value[k])
        elif isinstance(value, (list, tuple)):
            return
        else:
            rows.append({"Metric": prefix, "Value": value})

    walk("", to_jsonable(results))
    return pd.DataFrame(rows, columns=["Metric", "Value"])


def write_excel_workbook(report, tables, path):
    """Excel export with a Summary sheet plus one sheet per table"""
    output_excel = io.BytesIO()
    with pd.ExcelWriter(output_excel, engine="openpyxl") as writer:
        summary_dataframe(report.get("results", {})).to_excel(writer, sheet_name="Summary", index=False)
        for name, df in tables.items():
            df.to_excel(writer, sheet_name=name[:31], index=False)
    with open(path, "wb") as f:
        f.write(output_excel.getvalue())
    return path


def write_pdf_summary(report, path):
    """
    One-page PDF summary of a report.

    Args:
        report: Report dict from build_report.
        path: Destination file.

    Returns:
        str: path, or None if generation fails.
    """
    try:
        pdf_buffer = io.BytesIO()
        doc = SimpleDocTemplate(pdf_buffer, pagesize=A4)
        styles = getSampleStyleSheet()
        styles.add(ParagraphStyle(
            name="LeftHeading2",
            parent=styles["Heading2"],
            alignment=TA_LEFT,
            spaceBefore=6,
            spaceAfter=6,
            textColor="#002D56",
        ))
        elements = [
            Paragraph(f"Bose gas toolkit: {report.get('command', '')}", styles["Title"]),
            Spacer(1, 12),
            Paragraph(f"Generated {report.get('timestamp', '')}", styles["BodyText"]),
            Spacer(1, 6),
            Paragraph("Results", styles["LeftHeading2"]),
        ]
        summary = summary_dataframe(report.get("results", {}))
        table_data = [["Metric", "Value"]]
        for _, row in summary.iterrows():
            table_data.append([str(row["Metric"]), format_number(row["Value"]) if not isinstance(row["Value"], (str, bool)) else str(row["Value"])])
        table = Table(table_data, colWidths=[300, 180])
        table.setStyle(TableStyle([
            ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#002D56")),
            ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
            ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
            ("FONTSIZE", (0, 0), (-1, -1), 8),
            ("GRID", (0, 0), (-1, -1), 0.25, colors.grey),
        ]))
        elements.append(table)
        doc.build(elements)
        with open(path, "wb") as f:
            f.write(pdf_buffer.getvalue())
        return path
    except Exception as e:
        logger.error("PDF generation failed: %s", e)
        return None
