//! Streaming corpus ingestion: read raw posts from disk, validate them, and
//! honor author-removal lists before any processing.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A raw advice-seeking document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<i64>,
}

/// Post ids whose authors asked for removal.
#[derive(Debug, Clone, Default)]
pub struct RemovalList {
    pub ids: BTreeSet<String>,
}

impl RemovalList {
    /// Parse a plain-text file with one post id per line. Blank lines and
    /// `#`-prefixed comments are skipped; ids containing whitespace are
    /// rejected as malformed and counted.
    pub fn load(path: &Path) -> Result<(Self, usize), IngestError> {
        let file = File::open(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut ids = BTreeSet::new();
        let mut malformed = 0usize;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|source| IngestError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if trimmed.contains(char::is_whitespace) {
                malformed += 1;
                continue;
            }
            ids.insert(trimmed.to_string());
        }
        Ok((Self { ids }, malformed))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }
}

/// Per-run ingestion accounting. Satisfies the conservation law
/// `valid + skipped() = lines_read` and, after removal filtering,
/// `surviving + removed = valid`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub lines_read: usize,
    pub valid: usize,
    pub malformed: usize,
    pub missing_id: usize,
    pub empty_content: usize,
    pub duplicate_id: usize,
    /// Line-numbered descriptions of skipped lines, capped to keep logs sane.
    pub warnings: Vec<String>,
}

impl IngestSummary {
    const MAX_WARNINGS: usize = 100;

    pub fn skipped(&self) -> usize {
        self.malformed + self.missing_id + self.empty_content + self.duplicate_id
    }

    fn warn(&mut self, line_no: usize, reason: &str) {
        if self.warnings.len() < Self::MAX_WARNINGS {
            self.warnings.push(format!("line {line_no}: {reason}"));
        }
    }
}

/// Raw line shape before validation; `id` may be absent.
#[derive(Deserialize)]
struct RawPost {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: String,
    #[serde(default)]
    created: Option<i64>,
}

/// Streaming reader over a line-delimited post file.
///
/// Invalid lines are skipped and counted, never fatal; only an unreadable
/// file aborts the stream. Call [`PostStream::summary`] after draining the
/// iterator.
pub struct PostStream {
    lines: Lines<BufReader<File>>,
    path: PathBuf,
    seen_ids: BTreeSet<String>,
    summary: IngestSummary,
    io_error: Option<IngestError>,
}

impl PostStream {
    pub fn summary(&self) -> &IngestSummary {
        &self.summary
    }

    pub fn into_summary(self) -> IngestSummary {
        self.summary
    }

    /// The first read error encountered mid-stream, if any.
    pub fn io_error(&self) -> Option<&IngestError> {
        self.io_error.as_ref()
    }
}

impl Iterator for PostStream {
    type Item = Post;

    fn next(&mut self) -> Option<Post> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    self.io_error = Some(IngestError::Io {
                        path: self.path.clone(),
                        source,
                    });
                    return None;
                }
            };
            self.summary.lines_read += 1;
            let line_no = self.summary.lines_read;
            if line.trim().is_empty() {
                self.summary.malformed += 1;
                self.summary.warn(line_no, "empty line");
                continue;
            }
            let raw: RawPost = match serde_json::from_str(&line) {
                Ok(raw) => raw,
                Err(e) => {
                    self.summary.malformed += 1;
                    self.summary.warn(line_no, &format!("unparseable record: {e}"));
                    continue;
                }
            };
            let Some(id) = raw.id.filter(|id| !id.is_empty()) else {
                self.summary.missing_id += 1;
                self.summary.warn(line_no, "missing id");
                continue;
            };
            if raw.title.trim().is_empty() && raw.body.trim().is_empty() {
                self.summary.empty_content += 1;
                self.summary.warn(line_no, "empty title and body");
                continue;
            }
            if !self.seen_ids.insert(id.clone()) {
                self.summary.duplicate_id += 1;
                self.summary.warn(line_no, &format!("duplicate id {id}"));
                continue;
            }
            self.summary.valid += 1;
            return Some(Post {
                id,
                title: raw.title,
                body: raw.body,
                created: raw.created,
            });
        }
    }
}

/// Open a line-delimited post file for streaming.
pub fn load_posts(path: &Path) -> Result<PostStream, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(PostStream {
        lines: BufReader::new(file).lines(),
        path: path.to_path_buf(),
        seen_ids: BTreeSet::new(),
        summary: IngestSummary::default(),
        io_error: None,
    })
}

/// Result of applying a removal list to a post sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RemovalSummary {
    pub removed: usize,
    /// Removal-list ids that never appeared in the corpus.
    pub absent_ids: Vec<String>,
}

/// Drop every post whose id is on the removal list, preserving order.
///
/// Returns the surviving posts plus a summary naming removal ids that were
/// absent from the corpus.
pub fn apply_removal_list<I>(posts: I, removals: &RemovalList) -> (Vec<Post>, RemovalSummary)
where
    I: IntoIterator<Item = Post>,
{
    let mut survivors = Vec::new();
    let mut seen_removed: BTreeSet<String> = BTreeSet::new();
    for post in posts {
        if removals.contains(&post.id) {
            seen_removed.insert(post.id);
        } else {
            survivors.push(post);
        }
    }
    let absent_ids: Vec<String> = removals
        .ids
        .iter()
        .filter(|id| !seen_removed.contains(*id))
        .cloned()
        .collect();
    (
        survivors,
        RemovalSummary {
            removed: seen_removed.len(),
            absent_ids,
        },
    )
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(lines: &[&str]) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        let mut f = File::create(&path).unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        (dir, path)
    }

    fn post(id: &str) -> String {
        format!(r#"{{"id":"{id}","title":"t {id}","body":"b {id}"}}"#)
    }

    #[test]
    fn valid_lines_pass_through_in_order() {
        let (_dir, path) = write_lines(&[&post("p1"), &post("p2"), &post("p3")]);
        let stream = load_posts(&path).unwrap();
        let posts: Vec<Post> = stream.collect();
        assert_eq!(
            posts.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
            vec!["p1", "p2", "p3"]
        );
    }

    #[test]
    fn missing_id_is_counted_not_fatal() {
        let (_dir, path) = write_lines(&[
            &post("p1"),
            r#"{"title":"no id","body":"x"}"#,
            &post("p2"),
        ]);
        let mut stream = load_posts(&path).unwrap();
        let posts: Vec<Post> = stream.by_ref().collect();
        assert_eq!(posts.len(), 2);
        let summary = stream.into_summary();
        assert_eq!(summary.missing_id, 1);
        assert_eq!(summary.valid, 2);
        assert_eq!(summary.lines_read, 3);
    }

    #[test]
    fn malformed_and_empty_records_are_skipped_with_warnings() {
        let (_dir, path) = write_lines(&[
            "not json at all",
            r#"{"id":"p1","title":"","body":"  "}"#,
            &post("ok"),
            &post("ok"),
        ]);
        let mut stream = load_posts(&path).unwrap();
        let posts: Vec<Post> = stream.by_ref().collect();
        assert_eq!(posts.len(), 1);
        let summary = stream.summary();
        assert_eq!(summary.malformed, 1);
        assert_eq!(summary.empty_content, 1);
        assert_eq!(summary.duplicate_id, 1);
        assert!(summary.warnings.iter().any(|w| w.starts_with("line 1:")));
        // Conservation: valid + skipped = lines read.
        assert_eq!(summary.valid + summary.skipped(), summary.lines_read);
    }

    #[test]
    fn figure_post_round_trips() {
        let title = "How can I energize myself?";
        let body = "I am generally a person who needs a lot of sleep. Help? What has worked for you?";
        let line = serde_json::to_string(&Post {
            id: "fig".to_string(),
            title: title.to_string(),
            body: body.to_string(),
            created: Some(1_542_758_400),
        })
        .unwrap();
        let (_dir, path) = write_lines(&[&line]);
        let posts: Vec<Post> = load_posts(&path).unwrap().collect();
        assert_eq!(posts[0].title, title);
        assert_eq!(posts[0].body, body);
        assert_eq!(posts[0].created, Some(1_542_758_400));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        assert!(load_posts(Path::new("/definitely/not/here.jsonl")).is_err());
    }

    #[test]
    fn empty_removal_list_is_identity() {
        let posts: Vec<Post> = (0..5)
            .map(|i| Post {
                id: format!("p{i}"),
                title: "t".into(),
                body: "b".into(),
                created: None,
            })
            .collect();
        let (kept, summary) = apply_removal_list(posts.clone(), &RemovalList::default());
        assert_eq!(kept, posts);
        assert_eq!(summary.removed, 0);
        assert!(summary.absent_ids.is_empty());
    }

    #[test]
    fn removal_drops_exactly_the_listed_ids() {
        let posts: Vec<Post> = (0..5)
            .map(|i| Post {
                id: format!("p{i}"),
                title: "t".into(),
                body: "b".into(),
                created: None,
            })
            .collect();
        let removals = RemovalList {
            ids: ["p1", "p3"].iter().map(|s| s.to_string()).collect(),
        };
        let (kept, summary) = apply_removal_list(posts, &removals);
        assert_eq!(
            kept.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
            vec!["p0", "p2", "p4"]
        );
        assert_eq!(summary.removed, 2);
        // No survivor is on the list.
        assert!(kept.iter().all(|p| !removals.contains(&p.id)));
    }

    #[test]
    fn absent_removal_ids_are_reported() {
        let posts = vec![Post {
            id: "p0".to_string(),
            title: "t".into(),
            body: "b".into(),
            created: None,
        }];
        let removals = RemovalList {
            ids: ["ghost"].iter().map(|s| s.to_string()).collect(),
        };
        let (kept, summary) = apply_removal_list(posts.clone(), &removals);
        assert_eq!(kept, posts);
        assert_eq!(summary.absent_ids, vec!["ghost".to_string()]);
    }

    #[test]
    fn removal_list_file_parses_comments_and_blanks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("removals.txt");
        std::fs::write(&path, "# removed by author request\np1\n\n  p2  \nbad id\n").unwrap();
        let (list, malformed) = RemovalList::load(&path).unwrap();
        assert!(list.contains("p1"));
        assert!(list.contains("p2"));
        assert_eq!(list.ids.len(), 2);
        assert_eq!(malformed, 1);
    }

    #[test]
    fn ingestion_is_deterministic() {
        let (_dir, path) = write_lines(&[&post("a"), "junk", &post("b")]);
        let run = || {
            let mut s = load_posts(&path).unwrap();
            let posts: Vec<Post> = s.by_ref().collect();
            (posts, s.into_summary())
        };
        assert_eq!(run(), run());
    }
}
