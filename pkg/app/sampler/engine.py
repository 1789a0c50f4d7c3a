import logging
import time
from concurrent.futures import ProcessPoolExecutor

import pandas as pd

from app.core.config import settings
from app.data.dataset import SurveyDataset
from app.sampler.distributions import RngStream
from app.sampler.dynamic import DynamicSgldSampler
from app.sampler.factory import get_sampler
from app.sampler.state import PosteriorDraws, merge_draws

logger = logging.getLogger(__name__)


def _run_chain(
    data: SurveyDataset, config, seed: int, chain: int
) -> tuple[PosteriorDraws, pd.DataFrame | None]:
    sampler = get_sampler(config)
    draws = sampler.run(data, RngStream(seed, stream_id=chain), chain=chain)
    diagnostics = None
    if isinstance(sampler, DynamicSgldSampler):
        diagnostics = sampler.diagnostics.to_frame()
        diagnostics.insert(0, "chain", chain)
    return draws, diagnostics


class EstimationEngine:
    """Runs independent chains, one RngStream per chain, and merges them post hoc."""

    def __init__(self, max_workers: int | None = None):
        self.max_workers = max_workers or settings.MAX_WORKERS

    def run(
        self, data: SurveyDataset, config, seed: int, chains: int = 1
    ) -> tuple[PosteriorDraws, pd.DataFrame | None]:
        """
        Execute `chains` chains of the sampler selected by config.mode.

        Args:
            data: Immutable dataset shared by every chain
            config: StaticConfig or DynamicConfig
            seed: Base seed; chain c uses stream id c
            chains: Number of independent chains

        Returns:
            Tuple of (merged draws, SGLD diagnostics frame or None)
        """
        start_time = time.time()
        if chains == 1 or self.max_workers == 1:
            results = [_run_chain(data, config, seed, c) for c in range(chains)]
        else:
            with ProcessPoolExecutor(max_workers=min(self.max_workers, chains)) as pool:
                futures = [
                    pool.submit(_run_chain, data, config, seed, c) for c in range(chains)
                ]
                # collected in chain order so parallelism never reorders output
                results = [f.result() for f in futures]

        merged = merge_draws([draws for draws, _ in results])
        frames = [diag for _, diag in results if diag is not None]
        diagnostics = pd.concat(frames, ignore_index=True) if frames else None

        logger.info(
            f"{chains} {config.mode} chain(s) finished in {time.time() - start_time:.2f}s, "
            f"{merged.n_snapshots} snapshots"
        )
        return merged, diagnostics
