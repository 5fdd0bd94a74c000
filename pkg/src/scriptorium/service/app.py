"""HTTP API for the review portal workflow.

Endpoints live under /v1 and follow the stage order upload -> (crop) ->
segment -> transcribe -> correct/translate -> export; requests that violate
the order return 409.  Slow steps run as jobs polled via /v1/jobs/{id}.
Raw transcriptions are never overwritten: corrections are stored alongside.

Cropping or editing baselines bumps the document's generation counter;
in-flight jobs from the previous generation refuse to publish their
results, so downstream state can never resurrect stale work.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response

from ..corpus import (
    CorpusError,
    PageDocument,
    PageParseError,
    TextLineRecord,
    parse_pagexml,
    write_pagexml,
)
from ..correct import MockProvider, HttpProvider, ProviderConfig, correct_transcription, translate
from ..decode import DecodeConfig
from ..lineproc import RasterImage
from ..lm import import_arpa
from ..nn.tensorio import load_weights
from ..pipeline import Recognizer, Segmenter
from .config import ServiceConfig
from .jobs import JobRegistry
from .store import DocumentNotFound, DocumentStore, new_document


def _load_recognizer(config: ServiceConfig):
    if not config.recognizer_weights:
        return None
    weights = load_weights(Path(config.recognizer_weights).read_bytes())
    lm = None
    if config.lm_path:
        lm = import_arpa(Path(config.lm_path).read_text(encoding="utf-8"))
    cfg = None
    if config.use_beam:
        cfg = DecodeConfig(beam_width=config.beam_width, lm_alpha=config.lm_alpha,
                           word_bonus=config.word_bonus)
    return Recognizer(weights=weights, lm=lm, decode_cfg=cfg)


def _load_segmenter(config: ServiceConfig):
    if not config.segmenter_weights:
        return None
    return Segmenter(weights=load_weights(Path(config.segmenter_weights).read_bytes()))


def _build_provider(config: ServiceConfig):
    if config.provider == "http":
        return HttpProvider(ProviderConfig(
            endpoint=config.provider_endpoint,
            model=config.provider_model,
            api_key_env=config.provider_api_key_env,
        ))
    return MockProvider()


def create_app(
    config: ServiceConfig | None = None,
    recognizer=None,
    segmenter=None,
    provider=None,
    jobs: JobRegistry | None = None,
) -> FastAPI:
    config = config or ServiceConfig()
    store = DocumentStore(config.store_dir)
    jobs = jobs or JobRegistry(config.llm_workers, config.compute_workers)
    recognizer = recognizer if recognizer is not None else _load_recognizer(config)
    segmenter = segmenter if segmenter is not None else _load_segmenter(config)
    provider = provider if provider is not None else _build_provider(config)

    app = FastAPI(title="scriptorium", openapi_url="/v1/openapi.json")

    def get_doc(doc_id: str) -> dict:
        try:
            return store.load(doc_id)
        except DocumentNotFound:
            raise HTTPException(404, f"no document {doc_id!r}")

    def active_image(record: dict) -> RasterImage:
        blob = record["crop_blob"] or record["image_blob"]
        return RasterImage.from_bytes(store.get_blob(blob))

    def active_dims(record: dict) -> tuple[int, int]:
        if record["crop"]:
            return record["crop"]["w"], record["crop"]["h"]
        return record["width"], record["height"]

    def reset_downstream(record: dict, from_stage: str) -> None:
        """Clear results below a stage and invalidate in-flight jobs."""
        record["generation"] = record.get("generation", 0) + 1
        if from_stage in ("crop",):
            record["baselines"] = None
        record["lines"] = None
        record["corrected"] = None
        record["translation"] = None

    # -- documents ----------------------------------------------------------

    @app.post("/v1/documents", status_code=201)
    async def upload(request: Request):
        data = await request.body()
        if len(data) > config.max_upload_bytes:
            raise HTTPException(413, f"upload exceeds {config.max_upload_bytes} bytes")
        try:
            image = RasterImage.from_bytes(data)
        except Exception:
            raise HTTPException(415, "body is not a decodable PNG/JPEG image")
        blob = store.put_blob(data)
        record = new_document(blob, image.width, image.height)
        record["generation"] = 0
        store.create(record)
        return {"id": record["id"]}

    @app.get("/v1/documents/{doc_id}")
    def get_document(doc_id: str):
        record = get_doc(doc_id)
        width, height = active_dims(record)
        return {
            "id": record["id"],
            "width": width,
            "height": height,
            "original_width": record["width"],
            "original_height": record["height"],
            "crop": record["crop"],
            "baselines": record["baselines"],
            "lines": record["lines"],
            "corrected": record["corrected"],
            "translation": record["translation"],
            "timestamps": record["timestamps"],
            "generation": record.get("generation", 0),
        }

    @app.get("/v1/documents/{doc_id}/image")
    def get_image(doc_id: str):
        record = get_doc(doc_id)
        image = active_image(record)
        return Response(content=image.to_png(), media_type="image/png")

    @app.post("/v1/documents/{doc_id}/crop")
    def crop(doc_id: str, rect: dict):
        for key in ("x", "y", "w", "h"):
            if key not in rect or not isinstance(rect[key], int):
                raise HTTPException(422, f"crop needs integer {key!r}")
        x, y, w, h = rect["x"], rect["y"], rect["w"], rect["h"]
        with store.update(doc_id) as record:
            if w <= 0 or h <= 0 or x < 0 or y < 0 \
                    or x + w > record["width"] or y + h > record["height"]:
                raise HTTPException(422, "crop rectangle outside image bounds")
            original = RasterImage.from_bytes(store.get_blob(record["image_blob"]))
            piece = RasterImage(original.pixels[y:y + h, x:x + w])
            record["crop"] = {"x": x, "y": y, "w": w, "h": h}
            record["crop_blob"] = store.put_blob(piece.to_png())
            reset_downstream(record, "crop")
            store.touch_stage(record, "cropped")
        return {"ok": True}

    @app.put("/v1/documents/{doc_id}/baselines")
    def put_baselines(doc_id: str, body: dict):
        baselines = body.get("baselines")
        if not isinstance(baselines, list):
            raise HTTPException(422, "body needs a 'baselines' list")
        with store.update(doc_id) as record:
            width, height = active_dims(record)
            cleaned = _validate_baselines(baselines, width, height)
            record["baselines"] = cleaned
            reset_downstream(record, "baselines")
            store.touch_stage(record, "segmented")
        return {"count": len(cleaned)}

    # -- jobs ---------------------------------------------------------------

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        snap = jobs.get(job_id)
        if snap is None:
            raise HTTPException(404, f"no job {job_id!r}")
        return snap

    def publish(doc_id: str, generation: int, mutate) -> None:
        """Apply a job's result unless the document changed underneath it."""
        with store.update(doc_id) as record:
            if record.get("generation", 0) != generation:
                raise RuntimeError("document changed during processing; result discarded")
            mutate(record)

    @app.post("/v1/documents/{doc_id}/segment")
    def segment(doc_id: str, body: dict | None = None):
        record = get_doc(doc_id)
        if config.require_crop and not record["crop"]:
            raise HTTPException(409, "crop the document before segmenting")
        pagexml_text = (body or {}).get("pagexml")
        if not pagexml_text and segmenter is None:
            raise HTTPException(
                409, "no segmentation weights loaded; supply baselines as "
                     "{'pagexml': ...} or via PUT /baselines"
            )
        generation = record.get("generation", 0)

        def run():
            rec = store.load(doc_id)
            width, height = active_dims(rec)
            if pagexml_text:
                try:
                    parsed = parse_pagexml(pagexml_text.encode("utf-8"))
                except PageParseError as exc:
                    raise RuntimeError(f"bad PageXML: {exc}")
                baselines = [line.baseline for line in parsed.page.lines]
            else:
                baselines = segmenter.segment(active_image(rec))
            cleaned = _validate_baselines(
                [[list(p) for p in b] for b in baselines], width, height
            )

            def mutate(r):
                r["baselines"] = cleaned
                store.touch_stage(r, "segmented")
            publish(doc_id, generation, mutate)
            return {"baselines": len(cleaned)}

        return {"job_id": jobs.submit("segment", run)}

    @app.post("/v1/documents/{doc_id}/transcribe")
    def transcribe(doc_id: str):
        record = get_doc(doc_id)
        if not record["baselines"]:
            raise HTTPException(409, "segment the document before transcribing")
        if recognizer is None:
            raise HTTPException(503, "no recognizer weights loaded")
        generation = record.get("generation", 0)

        def run():
            rec = store.load(doc_id)
            baselines = [[tuple(p) for p in b] for b in rec["baselines"]]
            texts = recognizer.transcribe_page(active_image(rec), baselines)

            def mutate(r):
                r["lines"] = texts
                store.touch_stage(r, "transcribed")
            publish(doc_id, generation, mutate)
            return {"lines": len(texts)}

        return {"job_id": jobs.submit("transcribe", run)}

    @app.post("/v1/documents/{doc_id}/correct")
    def correct(doc_id: str):
        record = get_doc(doc_id)
        if not record["lines"]:
            raise HTTPException(409, "transcribe the document before correcting")
        generation = record.get("generation", 0)

        def run():
            rec = store.load(doc_id)
            result = correct_transcription(rec["lines"], provider)

            def mutate(r):
                r["corrected"] = {
                    "lines": result.lines,
                    "changed": result.changed,
                    "fallback": result.fallback,
                    "attempts": result.attempts,
                }
                store.touch_stage(r, "corrected")
            publish(doc_id, generation, mutate)
            return {"fallback": result.fallback}

        return {"job_id": jobs.submit("correct", run)}

    @app.post("/v1/documents/{doc_id}/translate")
    def translate_endpoint(doc_id: str):
        record = get_doc(doc_id)
        if not record["lines"]:
            raise HTTPException(409, "transcribe the document before translating")
        generation = record.get("generation", 0)

        def run():
            rec = store.load(doc_id)
            text = translate(rec["lines"], provider)

            def mutate(r):
                r["translation"] = text
                store.touch_stage(r, "translated")
            publish(doc_id, generation, mutate)
            return {"characters": len(text)}

        return {"job_id": jobs.submit("translate", run)}

    # -- export ---------------------------------------------------------------

    @app.get("/v1/documents/{doc_id}/export")
    def export(doc_id: str, format: str = "json"):
        record = get_doc(doc_id)
        if not record["lines"]:
            raise HTTPException(409, "nothing to export; transcribe first")
        if format == "txt":
            return Response("\n".join(record["lines"]) + "\n", media_type="text/plain")
        if format == "json":
            corrected = record["corrected"] or {}
            corrected_lines = corrected.get("lines") or []
            return {
                "id": record["id"],
                "lines": [
                    {
                        "baseline": baseline,
                        "raw": raw,
                        "corrected": corrected_lines[i] if i < len(corrected_lines) else None,
                    }
                    for i, (baseline, raw) in enumerate(
                        zip(record["baselines"], record["lines"])
                    )
                ],
                "correction_fallback": corrected.get("fallback"),
                "translation": record["translation"],
            }
        if format == "pagexml":
            width, height = active_dims(record)
            doc = PageDocument(image_ref=f"{record['id']}.png", width_px=width, height_px=height)
            for i, (baseline, text) in enumerate(zip(record["baselines"], record["lines"]), 1):
                doc.lines.append(TextLineRecord(
                    id=f"l{i}", baseline=[tuple(p) for p in baseline], transcription=text,
                ))
            try:
                data = write_pagexml(doc)
            except CorpusError as exc:
                raise HTTPException(500, f"export failed: {exc}")
            return Response(content=data, media_type="application/xml")
        raise HTTPException(422, f"unknown export format {format!r}")

    app.state.store = store
    app.state.jobs = jobs
    app.state.config = config
    return app


def _validate_baselines(baselines, width: int, height: int) -> list:
    cleaned = []
    for i, points in enumerate(baselines):
        if not isinstance(points, list) or len(points) < 2:
            raise HTTPException(422, f"baseline {i} needs >= 2 points")
        try:
            typed = [(int(x), int(y)) for x, y in points]
        except (TypeError, ValueError):
            raise HTTPException(422, f"baseline {i} has malformed points")
        xs = [x for x, _ in typed]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise HTTPException(422, f"baseline {i} x-coordinates must increase")
        for x, y in typed:
            if not (0 <= x <= width and 0 <= y <= height):
                raise HTTPException(422, f"baseline {i} point ({x},{y}) outside image")
        cleaned.append([list(p) for p in typed])
    # top-to-bottom ordering drives the per-line output order downstream
    cleaned.sort(key=lambda poly: sum(y for _, y in poly) / len(poly))
    return cleaned
