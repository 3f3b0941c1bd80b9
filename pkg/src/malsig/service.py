"""HTTP query service over a loaded fingerprint store.

Endpoints:

    POST /query   raw binary body -> JSON match result (top-k, confidence,
                  timing).  400 on an empty body, 413 above the size cap.
    GET  /stats   record count, dimension, feature config, uptime.
    GET  /health  liveness; 503 until the index finishes building.

The service is read-only: uploads are fingerprinted, matched, and
discarded.  The loaded index is immutable, so concurrent queries are safe.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import features as feat
from . import retrieval, store as store_mod

log = logging.getLogger(__name__)

DEFAULT_MAX_BODY = 32 * 1024 * 1024


class QueryService:
    """Owns the store, the ball-tree index, and the HTTP server."""

    def __init__(
        self,
        store_path,
        host: str = "127.0.0.1",
        port: int = 8020,
        top_k: int = 10,
        max_body: int = DEFAULT_MAX_BODY,
        leaf_size: int = 40,
        thresholds: retrieval.ConfidenceThresholds | None = None,
    ):
        self.store_path = store_path
        self.host = host
        self.port = port
        self.top_k = top_k
        self.max_body = max_body
        self.leaf_size = leaf_size
        self.thresholds = thresholds
        self.ready = False
        self.started_at = time.time()
        self.index: retrieval.FingerprintIndex | None = None
        self.feature_config: feat.FeatureConfig | None = None
        self.metadata: dict = {}
        self._httpd: ThreadingHTTPServer | None = None

    def load(self):
        records, metadata = store_mod.load(self.store_path)
        self.metadata = metadata
        self.feature_config = feat.config_from_metadata(metadata["feature"])
        self.index = retrieval.build_index(
            records, leaf_size=self.leaf_size, thresholds=self.thresholds
        )
        self.ready = True

    def bind(self) -> int:
        """Create the listening socket; returns the bound port."""
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                log.debug("http: " + fmt, *args)

            def _send_json(self, code: int, payload: dict):
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/health":
                    if service.ready:
                        self._send_json(200, {"status": "ok"})
                    else:
                        self._send_json(503, {"status": "index building"})
                elif self.path == "/stats":
                    if not service.ready:
                        self._send_json(503, {"error": "index building"})
                        return
                    self._send_json(
                        200,
                        {
                            "record_count": len(service.index.records),
                            "dimension": service.index.dim,
                            "feature": service.metadata.get("feature", {}),
                            "uptime_seconds": time.time() - service.started_at,
                        },
                    )
                else:
                    self._send_json(404, {"error": "unknown path"})

            def do_POST(self):
                if self.path != "/query":
                    self._send_json(404, {"error": "unknown path"})
                    return
                if not service.ready:
                    self._send_json(503, {"error": "index building"})
                    return
                length = int(self.headers.get("Content-Length") or 0)
                if length <= 0:
                    self._send_json(400, {"error": "empty body"})
                    return
                if length > service.max_body:
                    self._send_json(413, {"error": f"body exceeds {service.max_body} bytes"})
                    return
                raw = self.rfile.read(length)
                if not raw:
                    self._send_json(400, {"error": "empty body"})
                    return
                try:
                    descriptor = feat.describe_bytes(raw, service.feature_config)
                    result = service.index.query(descriptor, k=service.top_k)
                except Exception as exc:
                    self._send_json(400, {"error": str(exc)})
                    return
                self._send_json(200, result.to_dict())

        self._httpd = ThreadingHTTPServer((self.host, self.port), Handler)
        self.port = self._httpd.server_address[1]
        return self.port

    def serve_forever(self):
        if self._httpd is None:
            self.bind()
        if not self.ready:
            self.load()
        log.info("serving on %s:%d (%d records)", self.host, self.port,
                 len(self.index.records))
        self._httpd.serve_forever()

    def start_background(self) -> int:
        """Bind, then build the index and serve from a daemon thread.

        The socket accepts connections immediately; requests get 503 until
        the index is ready.  Returns the bound port.
        """
        port = self.bind()
        thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        thread.start()
        self.load()
        return port

    def shutdown(self):
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
