"""Empirical price of anarchy for position auctions."""
from .auction import AuctionContext, AuctionOutcome, BidProfile, opt_assignment, rank_bidders, run_gsp
from .covering import CoveringResult, compute_covering
from .dataset import AuctionDataset, dump_jsonl, load_dataset, summarize, total_revenue
from .epoa import BootstrapCI, EmpiricalPoA, EpoaReport, analyze, bootstrap_ci, compare_correlation_modes
from .exceptions import (BidCapTooLow, DomainError, EmptyBidderSet, EpoaError, MalformedContext,
                         NeverAllocated, NonPositiveMu, OutOfRange, ParseError, SpecError,
                         ValidationError, ZeroRevenue)
from .interim import BidGrid, InterimCurveEstimator, InterimCurves, estimate_curves
from .synth import GroundTruth, SynthSpec, gen_correlated, gen_fpa_bne, gen_gsp_learning
from .thresholds import ThresholdCurve, build_thresholds, threshold_integral
from .valuecover import lambda_concentration, lambda_mu1, rho, value_cover

__version__ = "0.1.0"
