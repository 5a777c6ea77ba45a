"""Regenerate the bundled offline fixture (corpus, train/test QA pairs).

Each topic has one long answer sentence and seven short "distractor"
sentences that score higher on cosine similarity to the question but share
fewer words with it. With two retrieved chunks a 10% top-k keeps only part
of a topic block, while 15-20% keeps the whole block.

    python scripts/make_fixture.py src/leanctx/data
"""
import json, sys
OUT = sys.argv[1]
ENTITIES = [
  ("Zephyria", "a cold moon circling a gas giant in an outer belt.",
   [("orbital period", "spans exactly 412 local days beneath its twin suns", "in days"),
    ("surface gravity", "measures roughly 0.6 g according to lander telemetry", "per telemetry"),
    ("ice depth", "reaches nearly eleven kilometres near its southern pole", "in kilometres")]),
  ("Quorvale", "a river city famous for its floating markets.",
   [("founding year", "traces back to 1147 when salt traders settled there", "for salt traders"),
    ("harbour capacity", "allows about ninety barges to dock at once", "in barges"),
    ("mayor election", "happens every four winters through lantern ballots", "for ballots")]),
  ("Brightmere", "a research lab that builds tiny weather sensors.",
   [("sensor weight", "stays below three grams thanks to carbon shells", "in grams"),
    ("battery lifetime", "lasts around eighteen months between charges", "in months"),
    ("staff headcount", "grew to 214 engineers during last spring", "among engineers")]),
  ("Talvik", "a mountain village known for wool and cheese.",
   [("cheese recipe", "mixes goat milk with wild thyme and sea salt", "with milk"),
    ("wool export", "ships nearly forty tonnes abroad every autumn", "in tonnes"),
    ("valley altitude", "sits close to 2300 metres above sea level", "in metres")]),
  ("Orrin Robotics", "a startup making warehouse robots.",
   [("robot speed", "tops out near nine kilometres per hour indoors", "per hour"),
    ("funding round", "raised 38 million dollars from four investors", "in dollars"),
    ("factory location", "moved to a converted shipyard near Gdansk", "near Gdansk")]),
  ("Lumen Festival", "an annual light art celebration.",
   [("ticket price", "starts at twelve euros for evening passes", "in euros"),
    ("opening night", "falls on the first Friday after the equinox", "after equinox"),
    ("artist count", "included sixty installations from nine countries", "across countries")]),
  ("Kestrel Line", "a high speed railway across open plains.",
   [("track length", "covers 870 kilometres between both capitals", "between capitals"),
    ("train frequency", "runs one departure every twenty minutes daily", "in minutes"),
    ("construction cost", "totalled roughly six billion over a decade", "in billion")]),
  ("Miravel Reef", "a coral reef protected as a marine park.",
   [("water temperature", "hovers around 27 degrees during summer months", "in degrees"),
    ("fish species", "number more than 340 recorded by divers", "according to divers"),
    ("reef area", "extends over ninety square kilometres offshore", "offshore")]),
  ("Aldgate Library", "a public library with a rare book vault.",
   [("vault humidity", "remains fixed at 45 percent using quiet pumps", "in percent"),
    ("opening hours", "run from eight until late evening on weekdays", "on weekdays"),
    ("manuscript collection", "holds 1200 medieval volumes in sealed cases", "in volumes")]),
  ("Pellucid Labs", "a company producing transparent solar glass.",
   [("panel efficiency", "peaks near fourteen percent under direct light", "under light"),
    ("glass thickness", "ranges from four to six millimetres per pane", "per pane"),
    ("patent portfolio", "contains 57 granted filings across Europe", "across Europe")]),
]
TAILS = ["surveys", "debates", "records", "reports", "charts", "notes", "archives"]
FILLER = ["Visitors often describe {e} as quiet and welcoming.",
          "Local guides publish short leaflets about {e} each season."]
docs, test, train = [], [], []
for di, (ent, intro, topics) in enumerate(ENTITIES):
    sents = [f"{ent} remains {intro}"]
    for ti, (attr, clause, qtail) in enumerate(topics):
        a1 = attr[0].upper() + attr[1:]
        sents.extend(f"{a1} of {ent} {t}." for t in TAILS[:4])
        answer = f"The {attr} of {ent} {clause}."
        sents.append(answer)
        sents.extend(f"{a1} of {ent} {t}." for t in TAILS[4:])
        row = {"query_id": f"q{di:02d}{ti}", "doc_id": f"doc{di:02d}",
               "question": f"What is the {attr} of {ent} {qtail}?", "reference_answer": answer}
        (train if ti == 2 else test).append(row)
    sents.extend(f.format(e=ent) for f in FILLER)
    docs.append({"doc_id": f"doc{di:02d}", "text": " ".join(sents)})
def dump(name, rows):
    with open(f"{OUT}/{name}", "w") as fh:
        for r in rows: fh.write(json.dumps(r) + "\n")
dump("fixture_corpus.jsonl", docs); dump("fixture_qa_test.jsonl", test); dump("fixture_qa_train.jsonl", train)
print(len(docs), len(test), len(train))
