//! Embedded durable store: one data directory holding a snapshot document,
//! an append-only event log, and a content-addressed blob directory.
//!
//! ```text
//! <data>/snapshot.json   latest snapshot (replaced atomically via rename)
//! <data>/events.log      JSON lines {seq, change} newer than the snapshot
//! <data>/blobs/ab/ab..   attachments by SHA-256
//! <data>/LOCK            held exclusively by the writing process
//! ```
//!
//! A change is acknowledged once its log line is synced. Loading reads the
//! snapshot, replays log records with a higher sequence number, and verifies
//! integrity. A torn final log line (crash mid-append) was never
//! acknowledged and is discarded.

use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::resources::BlobRef;
use crate::state::{Change, State};

pub const FORMAT_VERSION: u32 = 1;

const SNAPSHOT: &str = "snapshot.json";
const SNAPSHOT_TMP: &str = "snapshot.json.tmp";
const EVENT_LOG: &str = "events.log";
const BLOBS: &str = "blobs";
const LOCK: &str = "LOCK";

/// A full persisted state. Also the backup/export document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    pub taxonomy_version: u64,
    /// Highest event-log sequence number folded into `state`.
    pub last_seq: u64,
    pub state: State,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    format_version: u32,
    taxonomy_version: u64,
    last_seq: u64,
    state: &'a State,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct LogRecord {
    seq: u64,
    change: Change,
}

/// Where an injected crash interrupts [`Store::save_interrupted`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrashPoint {
    /// Half of the temporary snapshot has been written.
    PartialTempWrite,
    /// The temporary snapshot is complete but not yet renamed.
    BeforeRename,
    /// The new snapshot is in place but the log has not been truncated.
    AfterRename,
}

fn io_at(path: &Path, err: std::io::Error) -> Error {
    Error::Io(format!("{}: {err}", path.display()))
}

fn parse_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let header: Header = serde_json::from_slice(bytes)
        .map_err(|e| Error::CorruptStore(format!("snapshot header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::FormatVersionUnsupported {
            found: header.format_version,
            supported: FORMAT_VERSION,
        });
    }
    serde_json::from_slice(bytes).map_err(|e| Error::CorruptStore(format!("snapshot: {e}")))
}

fn encode_snapshot(state: &State, last_seq: u64) -> Vec<u8> {
    serde_json::to_vec(&SnapshotRef {
        format_version: FORMAT_VERSION,
        taxonomy_version: state.taxonomy().version(),
        last_seq,
        state,
    })
    .expect("state always serializes")
}

struct Replayed {
    snapshot: Snapshot,
    next_seq: u64,
    /// Byte length of the log up to the last complete record.
    valid_log_len: u64,
}

fn replay(dir: &Path) -> Result<Replayed> {
    if !dir.is_dir() {
        return Err(Error::Io(format!(
            "data directory {} does not exist",
            dir.display()
        )));
    }
    let snapshot_path = dir.join(SNAPSHOT);
    let mut snapshot = match fs::read(&snapshot_path) {
        Ok(bytes) => parse_snapshot(&bytes)?,
        Err(e) if e.kind() == ErrorKind::NotFound => Snapshot {
            format_version: FORMAT_VERSION,
            taxonomy_version: 0,
            last_seq: 0,
            state: State::new(),
        },
        Err(e) => return Err(io_at(&snapshot_path, e)),
    };

    let log_path = dir.join(EVENT_LOG);
    let log = match fs::read(&log_path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_at(&log_path, e)),
    };
    let mut last_seq = snapshot.last_seq;
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < log.len() {
        line_no += 1;
        let Some(end) = log[offset..].iter().position(|b| *b == b'\n') else {
            // torn tail: never acknowledged
            break;
        };
        let line = &log[offset..offset + end];
        let record: LogRecord = serde_json::from_slice(line)
            .map_err(|e| Error::CorruptStore(format!("event log line {line_no}: {e}")))?;
        if record.seq > snapshot.last_seq {
            if record.seq <= last_seq {
                return Err(Error::CorruptStore(format!(
                    "event log line {line_no}: sequence {} out of order",
                    record.seq
                )));
            }
            snapshot.state.apply(&record.change);
            last_seq = record.seq;
        }
        offset += end + 1;
    }
    snapshot.state.check_integrity()?;
    snapshot.taxonomy_version = snapshot.state.taxonomy().version();
    Ok(Replayed {
        next_seq: last_seq + 1,
        valid_log_len: offset as u64,
        snapshot: Snapshot {
            last_seq,
            ..snapshot
        },
    })
}

fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir)
        .and_then(|d| d.sync_all())
        .map_err(|e| io_at(dir, e))
}

/// Exclusive owner of a data directory.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    log: File,
    next_seq: u64,
    log_bytes: u64,
    _lock: File,
}

impl Store {
    /// Opens (creating if needed) and locks `dir`, returning the store and
    /// the recovered snapshot.
    pub fn open(dir: impl AsRef<Path>) -> Result<(Store, Snapshot)> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(BLOBS)).map_err(|e| io_at(&dir, e))?;
        let lock_path = dir.join(LOCK);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| io_at(&lock_path, e))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(Error::DataDirLocked),
            Err(fs::TryLockError::Error(e)) => return Err(io_at(&lock_path, e)),
        }

        let replayed = replay(&dir)?;
        let _ = fs::remove_file(dir.join(SNAPSHOT_TMP));
        let log_path = dir.join(EVENT_LOG);
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| io_at(&log_path, e))?;
        // drop a torn tail so new records start on a clean line
        if log.metadata().map_err(|e| io_at(&log_path, e))?.len() != replayed.valid_log_len {
            log.set_len(replayed.valid_log_len)
                .and_then(|_| log.sync_all())
                .map_err(|e| io_at(&log_path, e))?;
        }
        let store = Store {
            dir,
            log,
            next_seq: replayed.next_seq,
            log_bytes: replayed.valid_log_len,
            _lock: lock,
        };
        Ok((store, replayed.snapshot))
    }

    /// Reads the latest consistent snapshot without taking the lock.
    pub fn load(dir: impl AsRef<Path>) -> Result<Snapshot> {
        replay(dir.as_ref()).map(|r| r.snapshot)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Size of the event log not yet folded into a snapshot.
    pub fn log_bytes(&self) -> u64 {
        self.log_bytes
    }

    pub fn append_event(&mut self, change: &Change) -> Result<()> {
        self.append(std::slice::from_ref(change))
    }

    /// Appends `changes` and syncs before returning.
    pub fn append(&mut self, changes: &[Change]) -> Result<()> {
        if changes.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        let mut seq = self.next_seq;
        for change in changes {
            serde_json::to_writer(&mut buf, &LogRecord {
                seq,
                change: change.clone(),
            })
            .expect("changes always serialize");
            buf.push(b'\n');
            seq += 1;
        }
        let log_path = self.dir.join(EVENT_LOG);
        self.log
            .write_all(&buf)
            .and_then(|_| self.log.sync_data())
            .map_err(|e| io_at(&log_path, e))?;
        self.next_seq = seq;
        self.log_bytes += buf.len() as u64;
        Ok(())
    }

    /// Atomically replaces the snapshot with `state` and truncates the log.
    pub fn save(&mut self, state: &State) -> Result<()> {
        self.save_inner(state, None)
    }

    /// [`save`](Self::save) with an injected crash at `point`. The store is
    /// left exactly as a killed process would leave it; drop it and reopen.
    #[doc(hidden)]
    pub fn save_interrupted(&mut self, state: &State, point: CrashPoint) -> Result<()> {
        self.save_inner(state, Some(point))
    }

    fn save_inner(&mut self, state: &State, crash: Option<CrashPoint>) -> Result<()> {
        state.check_integrity()?;
        let bytes = encode_snapshot(state, self.next_seq - 1);
        let tmp = self.dir.join(SNAPSHOT_TMP);
        let target = self.dir.join(SNAPSHOT);
        let mut file = File::create(&tmp).map_err(|e| io_at(&tmp, e))?;
        if crash == Some(CrashPoint::PartialTempWrite) {
            file.write_all(&bytes[..bytes.len() / 2])
                .map_err(|e| io_at(&tmp, e))?;
            return Ok(());
        }
        file.write_all(&bytes)
            .and_then(|_| file.sync_all())
            .map_err(|e| io_at(&tmp, e))?;
        drop(file);
        if crash == Some(CrashPoint::BeforeRename) {
            return Ok(());
        }
        fs::rename(&tmp, &target).map_err(|e| io_at(&target, e))?;
        sync_dir(&self.dir)?;
        if crash == Some(CrashPoint::AfterRename) {
            return Ok(());
        }
        let log_path = self.dir.join(EVENT_LOG);
        self.log
            .set_len(0)
            .and_then(|_| self.log.sync_all())
            .map_err(|e| io_at(&log_path, e))?;
        self.log_bytes = 0;
        Ok(())
    }

    fn blob_path(&self, sha256: &str) -> Result<PathBuf> {
        if sha256.len() != 64 || !sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::BlobNotFound(sha256.to_string()));
        }
        Ok(self.dir.join(BLOBS).join(&sha256[..2]).join(sha256))
    }

    /// Stores `bytes` under their SHA-256; storing the same content twice is
    /// a no-op.
    pub fn put_blob(&self, bytes: &[u8], file_name: Option<String>) -> Result<BlobRef> {
        let sha256 = hex::encode(Sha256::digest(bytes));
        let path = self.blob_path(&sha256)?;
        if !path.exists() {
            let parent = path.parent().expect("blob paths have a parent");
            fs::create_dir_all(parent).map_err(|e| io_at(parent, e))?;
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, bytes)
                .and_then(|_| File::open(&tmp)?.sync_all())
                .map_err(|e| io_at(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| io_at(&path, e))?;
        }
        Ok(BlobRef {
            sha256,
            size: bytes.len() as u64,
            file_name,
        })
    }

    pub fn blob(&self, sha256: &str) -> Result<Vec<u8>> {
        let path = self.blob_path(sha256)?;
        fs::read(&path).map_err(|e| match e.kind() {
            ErrorKind::NotFound => Error::BlobNotFound(sha256.to_string()),
            _ => io_at(&path, e),
        })
    }
}

/// Writes the full state as one backup document.
pub fn export_state(state: &State, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = serde_json::to_vec_pretty(&SnapshotRef {
        format_version: FORMAT_VERSION,
        taxonomy_version: state.taxonomy().version(),
        last_seq: 0,
        state,
    })
    .expect("state always serializes");
    fs::write(path, bytes).map_err(|e| io_at(path, e))
}

/// Reads and verifies a backup document written by [`export_state`].
pub fn import_state(path: impl AsRef<Path>) -> Result<State> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_at(path, e))?;
    let snapshot = parse_snapshot(&bytes)?;
    snapshot.state.check_integrity()?;
    Ok(snapshot.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{Clock, ManualClock};
    use crate::ids::{MemberId, SubjectId};
    use crate::taxonomy::{Creator, Taxonomy, UsageEvent, UsageKind};

    fn changes() -> Vec<Change> {
        let now = ManualClock::at_epoch().now();
        let t = Taxonomy::new();
        let root = t
            .plan_subject("discipline", None, Creator::Seed, now, false)
            .unwrap();
        let profile = crate::profiles::Profiles::default()
            .plan_register("Tutor 1", "t1@univ-a.fr", now)
            .unwrap();
        vec![
            Change::SubjectAdded { subject: root },
            Change::MemberRegistered { profile },
            Change::UsageRecorded {
                event: UsageEvent {
                    subject: SubjectId(1),
                    member: MemberId(1),
                    kind: UsageKind::SearchSelect,
                    at: now,
                },
            },
        ]
    }

    fn applied(changes: &[Change]) -> State {
        let mut state = State::new();
        for c in changes {
            state.apply(c);
        }
        state
    }

    #[test]
    fn empty_directory_loads_fresh() {
        let dir = tempfile::tempdir().unwrap();
        let snap = Store::load(dir.path()).unwrap();
        assert_eq!(snap.format_version, FORMAT_VERSION);
        assert_eq!(snap.state, State::new());
        assert!(Store::load(dir.path().join("missing")).is_err());
    }

    #[test]
    fn append_then_reopen_replays() {
        let dir = tempfile::tempdir().unwrap();
        let changes = changes();
        {
            let (mut store, _) = Store::open(dir.path()).unwrap();
            store.append(&changes).unwrap();
        }
        let (_, snap) = Store::open(dir.path()).unwrap();
        assert_eq!(snap.state, applied(&changes));
        assert_eq!(snap.last_seq, 3);
    }

    #[test]
    fn save_folds_log_into_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let changes = changes();
        let state = applied(&changes);
        {
            let (mut store, _) = Store::open(dir.path()).unwrap();
            store.append(&changes).unwrap();
            store.save(&state).unwrap();
            assert_eq!(store.log_bytes(), 0);
        }
        let snap = Store::load(dir.path()).unwrap();
        assert_eq!(snap.state, state);
        assert_eq!(snap.last_seq, 3);
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let (_store, _) = Store::open(dir.path()).unwrap();
        assert_eq!(Store::open(dir.path()).unwrap_err(), Error::DataDirLocked);
        // read-only loads still work
        Store::load(dir.path()).unwrap();
    }

    #[test]
    fn torn_tail_is_discarded() {
        let dir = tempfile::tempdir().unwrap();
        let changes = changes();
        {
            let (mut store, _) = Store::open(dir.path()).unwrap();
            store.append(&changes[..2]).unwrap();
        }
        let mut log = OpenOptions::new()
            .append(true)
            .open(dir.path().join(EVENT_LOG))
            .unwrap();
        log.write_all(br#"{"seq":3,"change":{"op":"usage_rec"#).unwrap();
        drop(log);
        let (mut store, snap) = Store::open(dir.path()).unwrap();
        assert_eq!(snap.state, applied(&changes[..2]));
        store.append(&changes[2..]).unwrap();
        drop(store);
        assert_eq!(Store::load(dir.path()).unwrap().state, applied(&changes));
    }

    #[test]
    fn corrupt_middle_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(EVENT_LOG), "garbage\n{}\n").unwrap();
        assert!(matches!(
            Store::load(dir.path()),
            Err(Error::CorruptStore(msg)) if msg.contains("line 1")
        ));
    }

    #[test]
    fn dangling_reference_names_subject() {
        let dir = tempfile::tempdir().unwrap();
        let mut changes = changes();
        changes.remove(0);
        let state = applied(&changes);
        fs::write(dir.path().join(SNAPSHOT), encode_snapshot(&state, 0)).unwrap();
        match Store::load(dir.path()) {
            Err(Error::CorruptStore(msg)) => assert!(msg.contains("s1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsupported_format_version() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(SNAPSHOT), r#"{"format_version": 99}"#).unwrap();
        assert_eq!(
            Store::load(dir.path()).unwrap_err(),
            Error::FormatVersionUnsupported {
                found: 99,
                supported: FORMAT_VERSION
            }
        );
    }

    #[test]
    fn crash_points_leave_a_loadable_store() {
        for point in [
            CrashPoint::PartialTempWrite,
            CrashPoint::BeforeRename,
            CrashPoint::AfterRename,
        ] {
            let dir = tempfile::tempdir().unwrap();
            let changes = changes();
            let state = applied(&changes);
            {
                let (mut store, _) = Store::open(dir.path()).unwrap();
                store.append(&changes).unwrap();
                store.save_interrupted(&state, point).unwrap();
            }
            let (_, snap) = Store::open(dir.path()).unwrap();
            assert_eq!(snap.state, state, "{point:?}");
        }
    }

    #[test]
    fn blobs_are_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = Store::open(dir.path()).unwrap();
        let a = store.put_blob(b"lesson plan", Some("plan.txt".into())).unwrap();
        let b = store.put_blob(b"lesson plan", None).unwrap();
        assert_eq!(a.sha256, b.sha256);
        assert_eq!(store.blob(&a.sha256).unwrap(), b"lesson plan");
        assert!(matches!(store.blob(&"0".repeat(64)), Err(Error::BlobNotFound(_))));
        assert!(matches!(store.blob("../x"), Err(Error::BlobNotFound(_))));
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let state = applied(&changes());
        let path = dir.path().join("backup.json");
        export_state(&state, &path).unwrap();
        assert_eq!(import_state(&path).unwrap(), state);
    }
}
