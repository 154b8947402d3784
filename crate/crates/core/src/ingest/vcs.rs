//! Version-control access for fetching patch contents.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::process::Command;

use super::diff::{diff_texts, FileDiff};
use super::meta::VulnerabilityRecord;
use super::IngestError;

/// Environment variable naming the clone cache directory.
pub const CACHE_ENV: &str = "PATCH_TRIAGE_CACHE";

/// One file touched by a commit, with both sides of its content. A missing
/// side means the file was created or deleted; `None` bytes on both sides do
/// not occur.
#[derive(Debug, Clone)]
pub struct ChangedFile {
    pub before_path: Option<String>,
    pub after_path: Option<String>,
    pub before_bytes: Option<Vec<u8>>,
    pub after_bytes: Option<Vec<u8>>,
}

/// Access to the files touched by a commit in some repository.
pub trait VcsAdapter: Send + Sync {
    fn changed_files(&self, repo: &str, hash: &str) -> Result<Vec<ChangedFile>, IngestError>;
}

/// Fetches the full patch set for a record: every file touched by any of its
/// patch hashes, as file diffs with both texts attached. Binary files are
/// skipped with a warning; diffs from multiple hashes are concatenated in
/// hash order.
pub fn fetch_patch(
    record: &VulnerabilityRecord,
    vcs: &dyn VcsAdapter,
) -> Result<Vec<FileDiff>, IngestError> {
    let repo = record.repo.as_deref().ok_or_else(|| IngestError::RepoUnavailable {
        repo: "<none>".into(),
        reason: format!("{} has no repo field", record.vuln_id),
    })?;
    let mut diffs = Vec::new();
    for hash in &record.patch_hashes {
        for file in vcs.changed_files(repo, hash)? {
            let is_binary = |bytes: &Option<Vec<u8>>| {
                bytes.as_ref().is_some_and(|b| b.contains(&0))
            };
            if is_binary(&file.before_bytes) || is_binary(&file.after_bytes) {
                log::warn!(
                    "{}: skipping binary file {} in {}",
                    record.vuln_id,
                    file.after_path.or(file.before_path).unwrap_or_default(),
                    hash
                );
                continue;
            }
            let decode = |bytes: Option<Vec<u8>>| {
                bytes
                    .map(|b| String::from_utf8_lossy(&b).into_owned())
                    .unwrap_or_default()
            };
            let before_text = decode(file.before_bytes);
            let after_text = decode(file.after_bytes);
            let hunks = diff_texts(&before_text, &after_text);
            if hunks.is_empty() {
                continue;
            }
            diffs.push(FileDiff {
                path_before: file.before_path,
                path_after: file.after_path,
                hunks,
                before_text,
                after_text,
            });
        }
    }
    Ok(diffs)
}

/// Shells out to the `git` CLI. Remote repositories are cloned bare into the
/// cache directory (`PATCH_TRIAGE_CACHE`, or a directory under the system
/// temp dir) and reused across runs; local paths are used in place.
pub struct GitCliAdapter {
    cache_dir: PathBuf,
}

impl Default for GitCliAdapter {
    fn default() -> Self {
        Self::new()
    }
}

impl GitCliAdapter {
    pub fn new() -> Self {
        let cache_dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("patch-triage-cache"));
        GitCliAdapter { cache_dir }
    }

    pub fn with_cache_dir(cache_dir: PathBuf) -> Self {
        GitCliAdapter { cache_dir }
    }

    fn repo_dir(&self, repo: &str) -> Result<PathBuf, IngestError> {
        let as_path = Path::new(repo);
        if as_path.is_dir() {
            return Ok(as_path.to_path_buf());
        }
        let mut hasher = DefaultHasher::new();
        repo.hash(&mut hasher);
        let tail = repo
            .rsplit('/')
            .next()
            .unwrap_or("repo")
            .trim_end_matches(".git")
            .replace(|c: char| !c.is_ascii_alphanumeric(), "_");
        let dir = self.cache_dir.join(format!("{tail}-{:016x}", hasher.finish()));
        if dir.is_dir() {
            return Ok(dir);
        }
        std::fs::create_dir_all(&self.cache_dir)?;
        let out = Command::new("git")
            .args(["clone", "--bare", repo])
            .arg(&dir)
            .output()
            .map_err(|e| IngestError::RepoUnavailable {
                repo: repo.into(),
                reason: e.to_string(),
            })?;
        if !out.status.success() {
            let _ = std::fs::remove_dir_all(&dir);
            return Err(IngestError::RepoUnavailable {
                repo: repo.into(),
                reason: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(dir)
    }

    fn git(&self, dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
        let out = Command::new("git")
            .arg("-C")
            .arg(dir)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).trim().to_string());
        }
        Ok(out.stdout)
    }

    fn show(&self, dir: &Path, rev: &str, path: &str) -> Option<Vec<u8>> {
        self.git(dir, &["show", &format!("{rev}:{path}")]).ok()
    }
}

impl VcsAdapter for GitCliAdapter {
    fn changed_files(&self, repo: &str, hash: &str) -> Result<Vec<ChangedFile>, IngestError> {
        let dir = self.repo_dir(repo)?;
        self.git(&dir, &["rev-parse", "--verify", "--quiet", &format!("{hash}^{{commit}}")])
            .map_err(|_| IngestError::UnknownCommit {
                repo: repo.into(),
                hash: hash.into(),
            })?;
        let listing = self
            .git(
                &dir,
                &["diff-tree", "--no-commit-id", "--name-status", "-r", "-M", "--root", hash],
            )
            .map_err(|reason| IngestError::RepoUnavailable { repo: repo.into(), reason })?;
        let listing = String::from_utf8_lossy(&listing).into_owned();
        let parent = format!("{hash}^");
        let has_parent = self.git(&dir, &["rev-parse", "--verify", "--quiet", &parent]).is_ok();
        let mut files = Vec::new();
        for line in listing.lines() {
            let mut fields = line.split('\t');
            let status = fields.next().unwrap_or("");
            let p1 = fields.next();
            let p2 = fields.next();
            let (before_path, after_path) = match status.chars().next() {
                Some('A') => (None, p1),
                Some('D') => (p1, None),
                Some('R') | Some('C') => (p1, p2),
                Some(_) => (p1, p1),
                None => continue,
            };
            let before_bytes = match (&before_path, has_parent) {
                (Some(p), true) => self.show(&dir, &parent, p),
                _ => None,
            };
            let after_bytes = after_path.and_then(|p| self.show(&dir, hash, p));
            files.push(ChangedFile {
                before_path: before_path.map(str::to_string),
                after_path: after_path.map(str::to_string),
                before_bytes,
                after_bytes,
            });
        }
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(dir: &Path, args: &[&str]) -> String {
        let out = Command::new(args[0])
            .args(&args[1..])
            .current_dir(dir)
            .env("GIT_AUTHOR_NAME", "t")
            .env("GIT_AUTHOR_EMAIL", "t@t")
            .env("GIT_COMMITTER_NAME", "t")
            .env("GIT_COMMITTER_EMAIL", "t@t")
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8_lossy(&out.stdout).trim().to_string()
    }

    fn seed_repo(dir: &Path) -> (String, String) {
        run(dir, &["git", "init", "-q", "-b", "main"]);
        std::fs::write(dir.join("a.c"), "int f(void) { return 1; }\n").unwrap();
        std::fs::write(dir.join("b.c"), "int g(void) { return 2; }\n").unwrap();
        run(dir, &["git", "add", "."]);
        run(dir, &["git", "commit", "-q", "-m", "base"]);
        let first = run(dir, &["git", "rev-parse", "HEAD"]);
        std::fs::write(dir.join("a.c"), "int f(void) { return 3; }\n").unwrap();
        std::fs::write(dir.join("c.c"), "int h(void) { return 4; }\n").unwrap();
        run(dir, &["git", "add", "."]);
        run(dir, &["git", "rm", "-q", "b.c"]);
        run(dir, &["git", "commit", "-q", "-m", "fix"]);
        let second = run(dir, &["git", "rev-parse", "HEAD"]);
        (first, second)
    }

    #[test]
    fn reads_modified_added_and_deleted_files() {
        let tmp = tempfile::tempdir().unwrap();
        let (_, second) = seed_repo(tmp.path());
        let adapter = GitCliAdapter::new();
        let mut files = adapter
            .changed_files(tmp.path().to_str().unwrap(), &second)
            .unwrap();
        files.sort_by_key(|f| f.after_path.clone().or(f.before_path.clone()));
        assert_eq!(files.len(), 3);
        let a = &files[0];
        assert_eq!(a.after_path.as_deref(), Some("a.c"));
        assert!(String::from_utf8_lossy(a.before_bytes.as_ref().unwrap()).contains("return 1"));
        assert!(String::from_utf8_lossy(a.after_bytes.as_ref().unwrap()).contains("return 3"));
        let b = &files[1];
        assert_eq!(b.before_path.as_deref(), Some("b.c"));
        assert_eq!(b.after_path, None);
        assert_eq!(b.after_bytes, None);
        let c = &files[2];
        assert_eq!(c.before_path, None);
        assert!(c.after_bytes.is_some());
    }

    #[test]
    fn root_commit_diffs_against_empty() {
        let tmp = tempfile::tempdir().unwrap();
        let (first, _) = seed_repo(tmp.path());
        let adapter = GitCliAdapter::new();
        let files = adapter
            .changed_files(tmp.path().to_str().unwrap(), &first)
            .unwrap();
        assert_eq!(files.len(), 2);
        assert!(files.iter().all(|f| f.before_bytes.is_none()));
    }

    #[test]
    fn unknown_commit_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        seed_repo(tmp.path());
        let adapter = GitCliAdapter::new();
        let err = adapter
            .changed_files(tmp.path().to_str().unwrap(), "deadbeef")
            .unwrap_err();
        assert!(matches!(err, IngestError::UnknownCommit { .. }));
    }

    #[test]
    fn fetch_patch_concatenates_hashes_and_attaches_texts() {
        let tmp = tempfile::tempdir().unwrap();
        let (first, second) = seed_repo(tmp.path());
        let record = VulnerabilityRecord {
            vuln_id: "V1".into(),
            repo: Some(tmp.path().to_str().unwrap().to_string()),
            patch_hashes: vec![first, second],
            cve_id: None,
            declared_unit_count: None,
        };
        let diffs = fetch_patch(&record, &GitCliAdapter::new()).unwrap();
        // Two creations from the root commit plus three changes from the fix.
        assert_eq!(diffs.len(), 5);
        for d in &diffs {
            d.validate_content().unwrap();
            assert!(!d.hunks.is_empty());
        }
        let deleted = diffs.iter().find(|d| d.path_after.is_none()).unwrap();
        assert_eq!(deleted.path(), "b.c");
        assert!(deleted.after_text.is_empty());
    }
}
