"""PageXML round-tripping and dataset statistics.

Builds a small in-memory 'case', serializes it to PAGE XML, parses it back,
and prints the per-roll-type composition table.
"""

from scriptorium.corpus import (
    Charset,
    DatasetManifest,
    dataset_stats,
    parse_pagexml,
    write_pagexml,
)

from _common import render_page

# A synthetic page standing in for one court case.
_, page = render_page(
    ["Thomas de Brok optulit se", "versus Robertum de Luches", "de placito terre"],
    case_id="KB27-263m21",
)

xml_bytes = write_pagexml(page)
print(xml_bytes.decode("utf-8")[:400], "...\n")

# The parse is the inverse of the write (idempotent normalization).
parsed = parse_pagexml(xml_bytes)
assert parsed.page == page
print(f"round trip ok: {len(parsed.page.lines)} lines, no errors: {not parsed.errors}\n")

# Statistics in the shape of a dataset composition table.
refs = [(page.id, line.id) for line in page.lines]
manifest = DatasetManifest(train=refs, test=[], charset=Charset(["a"]),
                           pages={page.id: page})
print(dataset_stats(manifest).to_tsv())
