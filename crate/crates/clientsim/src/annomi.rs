//! Loader for the AnnoMI counseling-transcript CSV schema.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use clientsim_core::Turn;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Row {
    transcript_id: String,
    #[serde(default)]
    mi_quality: String,
    #[serde(default)]
    topic: String,
    utterance_id: u32,
    interlocutor: String,
    utterance_text: String,
}

/// One transcript as alternating counselor/client turns.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSession {
    pub id: String,
    pub topic: String,
    pub mi_quality: String,
    pub turns: Vec<Turn>,
}

/// (topic, MI quality, utterances as (id, from counselor, text)).
type Grouped = (String, String, Vec<(u32, bool, String)>);

/// Groups rows by transcript, orders them by utterance id, merges
/// consecutive lines from one speaker and drops client lines before the
/// therapist's first.
pub fn load_annomi(path: &Path) -> anyhow::Result<Vec<RealSession>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut grouped: BTreeMap<String, Grouped> = BTreeMap::new();
    for row in reader.deserialize() {
        let r: Row = row.with_context(|| format!("reading {}", path.display()))?;
        let counselor = r.interlocutor.trim().eq_ignore_ascii_case("therapist");
        let entry = grouped
            .entry(r.transcript_id.clone())
            .or_insert_with(|| (r.topic.clone(), r.mi_quality.clone(), Vec::new()));
        entry.2.push((
            r.utterance_id,
            counselor,
            r.utterance_text.trim().to_string(),
        ));
    }
    let mut out = Vec::new();
    for (id, (topic, mi_quality, mut rows)) in grouped {
        rows.sort_by_key(|r| r.0);
        let mut merged: Vec<(bool, String)> = Vec::new();
        for (_, counselor, text) in rows {
            if text.is_empty() || (merged.is_empty() && !counselor) {
                continue;
            }
            match merged.last_mut() {
                Some((c, t)) if *c == counselor => {
                    t.push(' ');
                    t.push_str(&text);
                }
                _ => merged.push((counselor, text)),
            }
        }
        let turns = merged
            .into_iter()
            .enumerate()
            .map(|(i, (c, t))| {
                if c {
                    Turn::counselor(i, t)
                } else {
                    Turn::client(i, t, None)
                }
            })
            .collect();
        out.push(RealSession {
            id: format!("annomi-{id}"),
            topic,
            mi_quality,
            turns,
        });
    }
    Ok(out)
}
