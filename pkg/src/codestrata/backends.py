"""Shared plumbing for remote generation and embedding backends."""

from __future__ import annotations

import logging
import random
import time

import httpx

logger = logging.getLogger(__name__)


class BackendUnavailable(Exception):
    """A backend transport failed; content-level problems never raise this."""


def post_json(
    url: str,
    payload: dict,
    *,
    headers: dict[str, str] | None = None,
    timeout: float = 30.0,
    retries: int = 3,
    retry_base_delay: float = 0.5,
) -> dict:
    """POST JSON with jittered exponential backoff.

    Makes up to ``retries`` attempts; transport errors and non-2xx
    statuses count as failures. Raises BackendUnavailable once the
    attempts are exhausted.
    """
    last_error: Exception | None = None
    for attempt in range(retries):
        try:
            response = httpx.post(url, json=payload, headers=headers, timeout=timeout)
            response.raise_for_status()
            body = response.json()
            if not isinstance(body, dict):
                raise BackendUnavailable(f"{url}: expected a JSON object response")
            return body
        except BackendUnavailable:
            raise
        except (httpx.HTTPError, ValueError) as exc:
            last_error = exc
            if attempt + 1 < retries:
                delay = retry_base_delay * (2**attempt) * (0.5 + random.random() / 2)
                logger.debug("retrying %s after error: %s", url, exc)
                time.sleep(delay)
    raise BackendUnavailable(f"{url}: {last_error}") from last_error
