from __future__ import annotations

from typing import Any, Dict, List, Sequence

from celery import group, shared_task

from .config import RunConfig
from .services import evaluate_level


@shared_task
def evaluate_level_task(config_data: Dict[str, Any], level: int, measure: str) -> Dict[str, Any]:
    return evaluate_level(RunConfig(data=config_data), level, measure)


def dispatch_levels(configs: Sequence[RunConfig], measure: str, parallel: bool = False,
                    stop_on_failure: bool = False) -> List[Dict[str, Any]]:
    """Evaluate independent levels in order, or as one Celery group when ``parallel`` is set.

    With ``stop_on_failure`` the table ends at the first failed level. A group
    still evaluates every level; rows past the failure are dropped.
    """
    if parallel:
        job = group(evaluate_level_task.s(config.data, level, measure) for level, config in enumerate(configs))
        results = job.apply_async().join(disable_sync_subtasks=False)
    else:
        results = (evaluate_level(config, level, measure) for level, config in enumerate(configs))
    rows = []
    for row in results:
        rows.append(row)
        if stop_on_failure and row['status'] == 'failed':
            break
    return rows
