"""Minimal chat-completion HTTP client.

Speaks the common JSON protocol (POST {model, messages, temperature},
read choices[0].message.content), which covers OpenAI-style services
and self-hosted deployments alike. The API credential comes from an
environment variable and is never logged.
"""

from __future__ import annotations

import logging
import os
import time

import requests

logger = logging.getLogger(__name__)

DEFAULT_CREDENTIAL_ENV = "SUPPORTEVAL_API_KEY"


class TransportError(RuntimeError):
    """The endpoint could not produce a response text."""


class ChatCompletionClient:
    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.0,
        timeout: float = 60.0,
        max_retries: int = 3,
        credential_env: str = DEFAULT_CREDENTIAL_ENV,
        backoff: float = 1.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.timeout = timeout
        self.max_retries = max_retries
        self.credential_env = credential_env
        self.backoff = backoff
        self._session = requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        credential = os.environ.get(self.credential_env)
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def complete(self, prompt: str) -> str:
        """One chat completion; retries transient transport failures."""
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff * 2 ** (attempt - 1)
                logger.warning(
                    "retrying chat completion (attempt %d/%d) in %.1fs",
                    attempt + 1, self.max_retries + 1, delay,
                )
                time.sleep(delay)
            try:
                response = self._session.post(
                    self.endpoint, json=payload, headers=self._headers(), timeout=self.timeout
                )
                if response.status_code >= 500 or response.status_code == 429:
                    last_error = TransportError(
                        f"endpoint returned HTTP {response.status_code}"
                    )
                    continue
                response.raise_for_status()
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
        raise TransportError(f"chat completion failed after {self.max_retries + 1} attempts") from last_error
