"""Drive the HTTP service through the whole review workflow.

Starts the API in a background uvicorn thread with a stub recognizer and a
mock LLM provider, then walks a synthetic page through upload, crop,
segmentation (from PageXML), transcription, correction, translation, and
export, exactly as the browser portal would.
"""

import tempfile
import threading
import time

import requests
import uvicorn

from scriptorium.corpus import build_charset, parse_pagexml, write_pagexml
from scriptorium.correct import MockProvider
from scriptorium.nn import Model, ModelWeights, build_recognizer
from scriptorium.pipeline import Recognizer
from scriptorium.service import ServiceConfig, create_app

from _common import render_page

PORT = 8972
BASE = f"http://127.0.0.1:{PORT}/v1"

charset = build_charset(["lorem ipsum dolor sit amet"])
spec = build_recognizer(len(charset.chars), conv_channels=(4, 4, 8, 8),
                        lstm_hidden=16, lstm_layers=2, input_height=32)
weights = ModelWeights(tensors=Model(spec, seed=9).state(), spec=spec, charset=charset)

store_dir = tempfile.mkdtemp(prefix="scriptorium_demo_")
app = create_app(ServiceConfig(store_dir=store_dir),
                 recognizer=Recognizer(weights=weights),
                 segmenter=None, provider=MockProvider())

server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=PORT, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)


def wait_job(job_id):
    while True:
        snap = requests.get(f"{BASE}/jobs/{job_id}").json()
        if snap["state"] in ("done", "failed"):
            return snap
        time.sleep(0.1)


image, page = render_page(["prima linea", "secunda linea", "tertia"], case_id="CP40-1m1")

doc = requests.post(f"{BASE}/documents", data=image.to_png()).json()["id"]
print("uploaded document:", doc)

requests.post(f"{BASE}/documents/{doc}/crop",
              json={"x": 0, "y": 0, "w": image.width, "h": image.height})
print("cropped to the full page (identity crop)")

xml = write_pagexml(page).decode("utf-8")
job = requests.post(f"{BASE}/documents/{doc}/segment", json={"pagexml": xml}).json()["job_id"]
print("segment:", wait_job(job)["result"])

job = requests.post(f"{BASE}/documents/{doc}/transcribe").json()["job_id"]
print("transcribe:", wait_job(job)["result"])

job = requests.post(f"{BASE}/documents/{doc}/correct").json()["job_id"]
print("correct:", wait_job(job)["result"])

job = requests.post(f"{BASE}/documents/{doc}/translate").json()["job_id"]
print("translate:", wait_job(job)["state"])

exported = requests.get(f"{BASE}/documents/{doc}/export", params={"format": "pagexml"})
print("exported PageXML re-parses to",
      len(parse_pagexml(exported.content).page.lines), "lines")

record = requests.get(f"{BASE}/documents/{doc}").json()
print("raw lines:      ", record["lines"])
print("corrected lines:", record["corrected"]["lines"])

server.should_exit = True
thread.join(timeout=5)
print("done")
