use miner_core::corpus::{load_jsonl, parse_jats, write_jsonl, DisciplineAssignment, Document, LoadMode};
use proptest::prelude::*;

fn document() -> impl Strategy<Value = Document> {
    (
        "[A-Z][0-9]{1,6}",
        "\\PC{0,30}",
        "\\PC{1,200}",
        prop::option::of(1900i32..2030),
        prop::collection::vec("[A-Za-z ]{1,20}", 0..4),
    )
        .prop_map(|(id, title, body, year, names)| {
            let mut d = Document::new(id, body);
            d.title = title;
            d.pub_year = year;
            let k = names.len() as f64;
            d.disciplines = names.into_iter().map(|n| DisciplineAssignment::new("", n, 1.0 / k)).collect();
            d
        })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

proptest! {
    #[test]
    fn jsonl_round_trip(docs in prop::collection::vec(document(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &docs).unwrap();
        std::fs::write(&path, buf).unwrap();
        let loaded: Vec<Document> = load_jsonl(&path, LoadMode::Strict).unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(loaded, docs);
    }

    #[test]
    fn jats_parsing_is_deterministic(paragraphs in prop::collection::vec("[A-Za-z0-9 .,]{1,80}", 1..6)) {
        let body: String = paragraphs.iter().map(|p| format!("<p>{}</p>", escape(p))).collect();
        let xml = format!(
            "<article><front><article-meta><article-id pub-id-type=\"pmcid\">PMC1</article-id>\
             <title-group><article-title>T</article-title></title-group></article-meta></front>\
             <body><sec>{body}</sec></body></article>"
        );
        let a = parse_jats(xml.as_bytes()).unwrap();
        let b = parse_jats(xml.as_bytes()).unwrap();
        prop_assert_eq!(&a, &b);
        for p in &paragraphs {
            let words: Vec<&str> = p.split_whitespace().collect();
            prop_assert!(words.is_empty() || a.body_text.contains(&words.join(" ")) || a.body_text.contains(p.trim()));
        }
    }
}
