# components/reports.py - Human-readable summaries, report documents and CSV tables.
# Column orders here are the documented file formats; keep them stable.

import json
import os
from typing import Any, Dict, Optional, Sequence

import pandas as pd

from engine.equilibrium import ConstructedEquilibrium
from engine.simulator import SimulationResult
from engine.verifier import VerificationReport
from market.schema import MarketConfig

SELLER_COLUMNS = ["seller", "stores", "profit_mean", "profit_se", "quantity", "analytic_profit"]
SUMMARY_COLUMNS = [
    "replications", "seed", "mean_searches", "first_store_fraction", "searcher_price_paid",
    "shopper_price_paid", "mean_search_cost", "total_profit", "consumer_surplus", "conservation_error",
]
HISTOGRAM_COLUMNS = ["bin_left", "bin_right", "mass"]


def equilibrium_summary(eq: ConstructedEquilibrium, config: MarketConfig) -> str:
    lines = [
        f"family: {eq.family}",
        f"store counts: {' '.join(str(n) for n in config.store_counts)}  mu={config.mu:g}  c={config.c:g}  M={config.M:g}",
        f"reserve price P_M: {eq.reserve_price:.10g}",
        f"lowest price P_L: {eq.lowest_price:.10g}",
        f"kappa (min expected price / P_M): {eq.kappa:.10g}",
        "seller  stores  strategy  profit  profit/branch",
    ]
    for i, (s, pi, n) in enumerate(zip(eq.profile.strategies, eq.analytic_profit, config.store_counts)):
        lines.append(f"{i:>6}  {n:>6}  {s.tag:<8}  {pi:.10g}  {pi / n:.10g}")
    return "\n".join(lines) + "\n"


def report_to_document(report: VerificationReport) -> Dict[str, Any]:
    return {
        "passed": report.passed,
        "checks": [{"name": c.name, "passed": c.passed, "evidence": c.evidence} for c in report.checks],
        "best_deviations": [
            {"seller": d.seller, "price": d.price, "profit": d.profit, "gain": d.gain}
            for d in report.best_deviations
        ],
        "notes": list(report.notes),
    }


def write_report(report: VerificationReport, path: str) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report_to_document(report), f, indent=2)
    return path


def simulation_tables(result: SimulationResult, config: MarketConfig,
                      analytic_profit: Optional[Sequence[float]] = None):
    """(sellers, summary, histogram) DataFrames in the documented column order."""
    n = config.n_sellers
    analytic = list(analytic_profit) if analytic_profit is not None else [float("nan")] * n
    sellers = pd.DataFrame({
        "seller": range(n),
        "stores": list(config.store_counts),
        "profit_mean": list(result.profit_mean),
        "profit_se": list(result.profit_se),
        "quantity": list(result.quantity),
        "analytic_profit": analytic,
    }, columns=SELLER_COLUMNS)
    summary = pd.DataFrame([{
        "replications": result.replications,
        "seed": result.seed,
        "mean_searches": result.mean_searches,
        "first_store_fraction": result.first_store_fraction,
        "searcher_price_paid": result.searcher_price_paid,
        "shopper_price_paid": result.shopper_price_paid,
        "mean_search_cost": result.mean_search_cost,
        "total_profit": result.total_profit,
        "consumer_surplus": result.consumer_surplus,
        "conservation_error": result.conservation_error,
    }], columns=SUMMARY_COLUMNS)
    edges = result.histogram_edges
    histogram = pd.DataFrame({
        "bin_left": edges[:-1],
        "bin_right": edges[1:],
        "mass": result.histogram_mass,
    }, columns=HISTOGRAM_COLUMNS)
    return sellers, summary, histogram


def write_simulation(result: SimulationResult, config: MarketConfig, out_dir: str,
                     analytic_profit: Optional[Sequence[float]] = None) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    sellers, summary, histogram = simulation_tables(result, config, analytic_profit)
    paths = {
        "sellers": os.path.join(out_dir, "simulation_sellers.csv"),
        "summary": os.path.join(out_dir, "simulation_summary.csv"),
        "histogram": os.path.join(out_dir, "price_paid_histogram.csv"),
    }
    sellers.to_csv(paths["sellers"], index=False, float_format="%.17g")
    summary.to_csv(paths["summary"], index=False, float_format="%.17g")
    histogram.to_csv(paths["histogram"], index=False, float_format="%.17g")
    return paths


def write_sweep(table: pd.DataFrame, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep.csv")
    table.to_csv(path, index=False, float_format="%.17g")
    return path


def write_text(text: str, path: str) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
