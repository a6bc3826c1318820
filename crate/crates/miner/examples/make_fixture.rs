//! Writes the bundled synthetic corpus: registry, JSONL and JATS articles,
//! labelling-tool annotations and a pipeline config.
//!
//! ```text
//! cargo run -p miner --example make_fixture -- fixtures/synthetic
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use miner_core::context::{extract_contexts, segment_sentences};
use miner_core::corpus::{parse_jats, uniform_assignments, DisciplineAssignment, Document, LicenseClass};
use miner_core::intent::IntentLabel;
use miner_core::registry::{normalize_url, read_registry, CompiledRegistry};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const SEED: u64 = 20240301;

const DIVISIONS: [(&str, &str); 22] = [
    ("01", "Mathematical Sciences"),
    ("02", "Physical Sciences"),
    ("03", "Chemical Sciences"),
    ("04", "Earth Sciences"),
    ("05", "Environmental Sciences"),
    ("06", "Biological Sciences"),
    ("07", "Agricultural and Veterinary Sciences"),
    ("08", "Information and Computing Sciences"),
    ("09", "Engineering"),
    ("10", "Technology"),
    ("11", "Medical and Health Sciences"),
    ("12", "Built Environment and Design"),
    ("13", "Education"),
    ("14", "Economics"),
    ("15", "Commerce, Management, Tourism and Services"),
    ("16", "Studies in Human Society"),
    ("17", "Psychology and Cognitive Sciences"),
    ("18", "Law and Legal Studies"),
    ("19", "Studies in Creative Arts and Writing"),
    ("20", "Language, Communication and Culture"),
    ("21", "History and Archaeology"),
    ("22", "Philosophy and Religious Studies"),
];

/// Disciplines drawn more often, as in a biomedical collection.
const COMMON: [usize; 6] = [5, 10, 4, 2, 6, 16];

const REGISTRY: &str = "\
repo_id,display_name,pattern,kind
zenodo,Zenodo,zenodo.org,data
figshare,Figshare,figshare.com,data
dryad,Dryad,datadryad.org,data
geo,Gene Expression Omnibus,ncbi.nlm.nih.gov/geo,data
sra,Sequence Read Archive,ncbi.nlm.nih.gov/sra,data
bioproject,BioProject,ncbi.nlm.nih.gov/bioproject,data
pubmed,PubMed,ncbi.nlm.nih.gov/pubmed,literature
pubmed,PubMed,pubmed.ncbi.nlm.nih.gov,literature
arrayexpress,ArrayExpress,ebi.ac.uk/arrayexpress,data
arrayexpress,ArrayExpress,ebi.ac.uk/biostudies/arrayexpress,data
pride,PRIDE,ebi.ac.uk/pride,data
ena,European Nucleotide Archive,ebi.ac.uk/ena,data
ebi,EMBL-EBI,ebi.ac.uk,data
uniprot,UniProt,uniprot.org,data
pdb,Protein Data Bank,rcsb.org,data
osf,Open Science Framework,osf.io,data
dataverse,Harvard Dataverse,dataverse.harvard.edu,data
openneuro,OpenNeuro,openneuro.org,data
pangaea,PANGAEA,pangaea.de,data
pangaea,PANGAEA,doi.pangaea.de,data
gbif,GBIF,gbif.org,data
kaggle,Kaggle,kaggle.com/datasets,data
icpsr,ICPSR,icpsr.umich.edu,data
physionet,PhysioNet,physionet.org,data
mendeley,Mendeley Data,data.mendeley.com,data
meertens,Meertens Institute collections,meertens.knaw.nl,data
synapse,Synapse,synapse.org,data
";

/// Repository ids with the URL shapes used when planting mentions.
const URLS: [(&str, &str); 24] = [
    ("zenodo", "https://zenodo.org/record/{n}"),
    ("zenodo", "https://doi.org/10.5281/zenodo.{n}"),
    ("figshare", "https://figshare.com/articles/dataset/{n}"),
    ("dryad", "https://datadryad.org/stash/dataset/doi:10.5061/dryad.{n}"),
    ("geo", "https://www.ncbi.nlm.nih.gov/geo/query/acc.cgi?acc=GSE{n}"),
    ("sra", "https://www.ncbi.nlm.nih.gov/sra/SRP{n}"),
    ("bioproject", "https://www.ncbi.nlm.nih.gov/bioproject/PRJNA{n}"),
    ("pubmed", "https://pubmed.ncbi.nlm.nih.gov/{n}/"),
    ("arrayexpress", "https://www.ebi.ac.uk/arrayexpress/experiments/E-MTAB-{n}"),
    ("pride", "https://www.ebi.ac.uk/pride/archive/projects/PXD{n}"),
    ("ena", "https://www.ebi.ac.uk/ena/browser/view/PRJEB{n}"),
    ("ebi", "https://www.ebi.ac.uk/interpro/entry/IPR{n}"),
    ("uniprot", "https://www.uniprot.org/uniprot/P{n}"),
    ("pdb", "https://www.rcsb.org/structure/{n}"),
    ("osf", "https://osf.io/{n}/"),
    ("dataverse", "https://dataverse.harvard.edu/dataset.xhtml?persistentId=doi:10.7910/DVN/{n}"),
    ("openneuro", "https://openneuro.org/datasets/ds{n}"),
    ("pangaea", "https://doi.pangaea.de/10.1594/PANGAEA.{n}"),
    ("gbif", "https://www.gbif.org/occurrence/download/{n}"),
    ("kaggle", "https://www.kaggle.com/datasets/lab/cohort-{n}"),
    ("icpsr", "https://www.icpsr.umich.edu/web/ICPSR/studies/{n}"),
    ("physionet", "https://physionet.org/content/mimic-{n}/"),
    ("mendeley", "https://data.mendeley.com/datasets/{n}/1"),
    ("meertens", "https://meertens.knaw.nl/en/collections/"),
];

const RELEASE: [&str; 5] = [
    "The raw sequencing reads have been deposited in {url} under accession number {acc}.",
    "All data generated in this study are available at {url}.",
    "The processed dataset can be accessed through {url}.",
    "Source data for every figure have been made available at {url} ({acc}).",
    "Our annotated corpus was released at {url} under a CC-BY licence.",
];

const REUSE: [&str; 5] = [
    "Expression profiles were downloaded from {url} and normalised jointly.",
    "Protein sequences were obtained from {url} for the alignment step.",
    "We used the public cohort retrieved from {url} as the validation set.",
    "The reference measurements were extracted from {url} before filtering.",
    "Occurrence records used in the models were acquired from {url}.",
];

const REFERENCE: [&str; 5] = [
    "Related collections are listed in {url}, see the portal documentation.",
    "For example, comparable structures are cross-referenced in {url}.",
    "Similar resources (e.g. {url}) host curated records of this kind.",
    "Earlier surveys were compared with the archive at {url}.",
    "The approach is reviewed in {url} and elsewhere.",
];

const NOTHING: [&str; 4] = [
    "Authors can upload your files directly to {url} before acceptance.",
    "Please read the instructions for authors at {url} prior to submission.",
    "More information about depositing supplementary material is given at {url}.",
    "This link will take you to {url} where you can re-enter its bibliographic details.",
];

const FILLER: [&str; 16] = [
    "Samples were collected over two consecutive field seasons.",
    "The cohort comprised {k} participants recruited at three sites.",
    "Results are summarised in Fig. 2 and discussed below.",
    "As reported by Smith et al. the effect persists across strata.",
    "Statistical significance was assessed with a two-sided test (p < 0.05).",
    "Model performance improved substantially after calibration.",
    "Analysis code is maintained at https://www.example.org/tools and mirrored locally.",
    "We thank J. R. Miller for comments on an earlier draft.",
    "Variants with low coverage, i.e. fewer than 10 reads, were removed.",
    "Does the association hold in older cohorts? We address this below.",
    "All procedures followed institutional guidelines.",
    "Measurements were repeated {k} times to estimate variance.",
    "Temperature and salinity were recorded at each station.",
    "The classifier was trained for 20 epochs with early stopping.",
    "Interviews were transcribed and coded independently by two authors.",
    "Counts were log-transformed prior to clustering.",
];

const TOPICS: [&str; 10] = [
    "Transcriptomic responses to drought stress",
    "Long-term monitoring of coastal sediment",
    "A cohort study of sleep and cognition",
    "Protein interaction maps in yeast",
    "Species distribution under warming scenarios",
    "Machine learning for clinical triage",
    "Urban mobility and air quality",
    "Proteomic profiling of tumour samples",
    "Dialect variation in oral histories",
    "Soil microbiome diversity across farms",
];

struct Planted {
    url: String,
    label: IntentLabel,
}

struct Article {
    doc: Document,
    /// Paragraphs of the body and back matter.
    body: Vec<String>,
    back: Vec<String>,
    abstract_: String,
    planted: Vec<Planted>,
}

fn fill(template: &str, url: &str, rng: &mut ChaCha8Rng) -> String {
    template
        .replace("{url}", url)
        .replace("{acc}", &format!("E-{:05}", rng.random_range(10000..99999)))
        .replace("{k}", &rng.random_range(3..400).to_string())
}

fn filler(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| fill(FILLER.choose(rng).unwrap(), "", rng)).collect()
}

fn pick_label(rng: &mut ChaCha8Rng) -> IntentLabel {
    match rng.random_range(0..100) {
        0..=57 => IntentLabel::Release,
        58..=84 => IntentLabel::Reuse,
        85..=95 => IntentLabel::Reference,
        _ => IntentLabel::Nothing,
    }
}

fn sentence_for(label: IntentLabel, url: &str, rng: &mut ChaCha8Rng) -> String {
    let pool: &[&str] = match label {
        IntentLabel::Release => &RELEASE,
        IntentLabel::Reuse => &REUSE,
        IntentLabel::Reference => &REFERENCE,
        IntentLabel::Nothing => &NOTHING,
    };
    fill(pool.choose(rng).unwrap(), url, rng)
}

fn disciplines(rng: &mut ChaCha8Rng) -> Vec<DisciplineAssignment> {
    let k = [1, 1, 2, 2, 2, 3].choose(rng).copied().unwrap();
    let mut idx: Vec<usize> = Vec::new();
    while idx.len() < k {
        let i = if rng.random_bool(0.7) {
            *COMMON.choose(rng).unwrap()
        } else {
            rng.random_range(0..DIVISIONS.len())
        };
        if !idx.contains(&i) {
            idx.push(i);
        }
    }
    uniform_assignments(idx.iter().map(|&i| DIVISIONS[i]))
}

fn article(i: usize, rng: &mut ChaCha8Rng) -> Article {
    let topic = TOPICS[i % TOPICS.len()];
    let mut planted = Vec::new();
    let mut plant = |label: IntentLabel, rng: &mut ChaCha8Rng| -> String {
        let (_, shape) = URLS.choose(rng).unwrap();
        let url = shape.replace("{n}", &format!("{}{:03}", 10 + i, rng.random_range(100..999)));
        planted.push(Planted { url: url.clone(), label });
        sentence_for(label, &url, rng)
    };

    // Articles 45-47 mention no registered repository.
    let sites = if (45..48).contains(&i) { 0 } else { [1, 1, 1, 2, 2, 3].choose(rng).copied().unwrap() };
    let abstract_ = filler(rng, 3).join(" ");
    let mut body = Vec::new();
    for _ in 0..rng.random_range(2..4) {
        let n = rng.random_range(3..6);
        body.push(filler(rng, n).join(" "));
    }
    let mut back = Vec::new();
    for s in 0..sites {
        let label = if s == 0 && rng.random_bool(0.5) { IntentLabel::Release } else { pick_label(rng) };
        let sentence = plant(label, rng);
        if label == IntentLabel::Release && rng.random_bool(0.5) {
            back.push(format!("Data availability. {sentence}"));
        } else {
            let p = rng.random_range(0..body.len());
            let mut sentences: Vec<String> = body[p].split(". ").map(str::to_string).collect();
            let at = rng.random_range(0..=sentences.len());
            sentences.insert(at, sentence.trim_end_matches('.').to_string());
            body[p] = sentences.join(". ");
            if !body[p].ends_with('.') && !body[p].ends_with('?') {
                body[p].push('.');
            }
        }
    }
    if i % 9 == 4 {
        // a repeated URL in one sentence merges into a single context
        if let Some(p) = planted.first() {
            let url = p.url.clone();
            body.push(format!(
                "The files at {url} mirror the listing at {url} and were used in all analyses."
            ));
        }
    }
    if i % 13 == 6 {
        body.push("A lookalike host such as https://zenodo.org.example.net/x is not a repository, nor is plain Zenodo.".into());
    }

    let mut doc = Document::new(format!("SYN{:04}", i + 1), String::new());
    doc.title = format!("{topic}: study {}", i + 1);
    doc.pub_year = if i % 17 == 3 { None } else { Some(2008 + (i as i32 * 7) % 16) };
    doc.disciplines = if i % 19 == 7 { Vec::new() } else { disciplines(rng) };
    if i == 12 {
        doc.disciplines = vec![
            DisciplineAssignment::new("06", "Biological Sciences", 0.75),
            DisciplineAssignment::new("05", "Environmental Sciences", 0.25),
        ];
    }
    doc.license_class = [LicenseClass::Comm, LicenseClass::Noncomm, LicenseClass::Other][i % 3];
    Article {
        doc,
        body,
        back,
        abstract_,
        planted,
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// JATS rendering. The first planted URL in the body becomes a link whose
/// visible text does not show the URL.
fn to_jats(a: &Article, pmc: u32) -> String {
    let mut body = String::new();
    let mut linked = false;
    for p in &a.body {
        let mut text = xml_escape(p);
        if !linked {
            if let Some(first) = a.planted.iter().find(|pl| p.contains(&pl.url)) {
                linked = true;
                let esc = xml_escape(&first.url);
                text = text.replacen(
                    &esc,
                    &format!("<ext-link ext-link-type=\"uri\" xlink:href=\"{esc}\">the repository record</ext-link>"),
                    1,
                );
            }
        }
        body.push_str(&format!("    <p>{text}</p>\n"));
    }
    let back: String = a.back.iter().map(|p| format!("    <p>{}</p>\n", xml_escape(p))).collect();
    let year = a.doc.pub_year.map(|y| format!("      <pub-date pub-type=\"epub\"><year>{y}</year></pub-date>\n")).unwrap_or_default();
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
<article xmlns:xlink=\"http://www.w3.org/1999/xlink\" article-type=\"research-article\">\n\
  <front>\n    <article-meta>\n      <article-id pub-id-type=\"pmc\">{pmc}</article-id>\n\
      <title-group><article-title>{title}</article-title></title-group>\n{year}\
      <abstract><p>{abs}</p></abstract>\n    </article-meta>\n  </front>\n\
  <body>\n{body}  </body>\n  <back>\n  <sec sec-type=\"data-availability\">\n{back}  </sec>\n  </back>\n</article>\n",
        title = xml_escape(&a.doc.title),
        abs = xml_escape(&a.abstract_),
    )
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, bytes).unwrap();
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/synthetic".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let registry = CompiledRegistry::compile(read_registry(REGISTRY.as_bytes()).unwrap()).unwrap();
    write(&out.join("registry.csv"), REGISTRY);

    let mut docs: Vec<Document> = Vec::new();
    let mut planted: BTreeMap<String, Vec<Planted>> = BTreeMap::new();
    let mut jsonl = Vec::new();
    for i in 0..50 {
        let mut a = article(i, &mut rng);
        if i >= 40 {
            // The last ten are delivered as JATS; they carry no disciplines.
            let pmc = 7_100_000 + i as u32;
            let xml = to_jats(&a, pmc);
            let collection = if i % 2 == 0 { "oa_comm" } else { "oa_noncomm" };
            let rel = format!("corpus/jats/{collection}/PMC{pmc}.xml");
            write(&out.join(&rel), &xml);
            let doc = parse_jats(xml.as_bytes()).unwrap();
            planted.insert(doc.doc_id.clone(), a.planted);
            docs.push(doc);
        } else {
            let mut lines = vec![a.doc.title.clone(), a.abstract_.clone()];
            lines.extend(a.body.iter().cloned());
            lines.extend(a.back.iter().cloned());
            a.doc.body_text = lines.join("\n");
            a.doc.source_path = format!("synthetic/{}.txt", a.doc.doc_id);
            a.doc.validate().unwrap();
            jsonl.push(serde_json::to_string(&a.doc).unwrap());
            planted.insert(a.doc.doc_id.clone(), a.planted);
            docs.push(a.doc);
        }
    }
    write(&out.join("corpus/documents.jsonl"), jsonl.join("\n") + "\n");

    // Gold labels: the planted intent of each context's first mention.
    let mut tasks = Vec::new();
    let mut n = 0usize;
    for doc in &docs {
        let mentions = registry.find_mentions(doc);
        let index = segment_sentences(doc);
        for ctx in extract_contexts(doc, &mentions, &index).unwrap() {
            let m = mentions
                .iter()
                .find(|m| m.repo_id == ctx.repo_id && index.sentence_at(m.start) == Some(ctx.core_index))
                .unwrap();
            let label = planted[&doc.doc_id]
                .iter()
                .find(|p| normalize_url(&p.url) == m.normalized_url || m.matched_text.contains(&p.url) || p.url.contains(&m.matched_text))
                .map(|p| p.label)
                .unwrap_or(IntentLabel::Nothing);
            let at = |min: usize| format!("2024-03-01T{:02}:{:02}:00Z", 9 + (n + min) / 60, (n + min) % 60);
            let result = |l: IntentLabel| json!([{"from_name": "intent", "to_name": "text", "type": "choices", "value": {"choices": [l.name()]}}]);
            let mut annotations = vec![json!({"completed_by": {"email": "annotator-a@example.org"}, "created_at": at(0), "result": result(label)})];
            if n.is_multiple_of(5) {
                let second = if n.is_multiple_of(15) { IntentLabel::from_index((label.index() + 1) % 4).unwrap() } else { label };
                annotations.push(json!({"completed_by": {"email": "annotator-b@example.org"}, "created_at": at(1), "result": result(second)}));
            }
            if n == 7 {
                // superseded by the later entry from the same annotator
                annotations.insert(0, json!({"completed_by": {"email": "annotator-a@example.org"}, "created_at": "2024-02-28T12:00:00Z", "result": result(IntentLabel::Nothing)}));
            }
            tasks.push(json!({"id": n + 1, "data": {"context_id": ctx.context_id, "text": ctx.text}, "annotations": annotations}));
            n += 1;
        }
    }
    write(&out.join("annotations.json"), serde_json::to_string_pretty(&tasks).unwrap() + "\n");

    let vocabulary: Vec<String> = DIVISIONS.iter().map(|(_, name)| format!("  {name:?},")).collect();
    let config = format!(
        "# Pipeline config for the bundled synthetic corpus.\n\
version = 1\nseed = {SEED}\nworkers = 2\n\n\
[corpus]\npaths = [\"corpus/documents.jsonl\", \"corpus/jats\"]\nvocabulary = [\n{}\n]\n\n\
[registry]\npath = \"registry.csv\"\n\n\
[classifier]\nmode = \"baseline\"\ntruncation = \"tail\"\nbatch_size = 16\ncheckpoint_every = 2\n\n\
[sample]\nsize = 20\n\n\
[annotations]\npath = \"annotations.json\"\n\n\
[evaluate]\nsplit = \"stratified\"\naveraging = \"weighted\"\n\n\
[analytics]\nmin_support = 5\n",
        vocabulary.join("\n")
    );
    write(&out.join("config.toml"), config);
    println!("wrote {} documents and {} annotation tasks to {}", docs.len(), tasks.len(), out.display());
}
