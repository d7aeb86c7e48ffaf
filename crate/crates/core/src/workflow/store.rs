//! Project persistence behind a common trait, with an in-memory store and a
//! SQLite store keeping one table per entity type plus the actions log.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rusqlite::{params, Connection, OptionalExtension};
use serde_json::Value;
use thiserror::Error;

use super::model::{Project, SCHEMA_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("project {0} not found")]
    NotFound(String),
    #[error("stored project has schema version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("store unavailable: {0}")]
    Unavailable(String),
    #[error("stored project is corrupt: {0}")]
    Corrupt(String),
    #[error("unknown store {0}")]
    UnknownStore(String),
}

pub trait ProjectStore: Send + Sync {
    fn name(&self) -> &str;

    /// Inserts or replaces the project. Saving an unchanged project again
    /// leaves the stored state as it was.
    fn save(&self, project: &Project) -> Result<(), StoreError>;

    fn load(&self, id: &str) -> Result<Project, StoreError>;

    fn list(&self) -> Result<Vec<String>, StoreError>;
}

fn decode(value: Value) -> Result<Project, StoreError> {
    let version = value.get("schema_version").and_then(Value::as_u64).unwrap_or(0);
    if version != u64::from(SCHEMA_VERSION) {
        return Err(StoreError::VersionMismatch { found: version as u32, expected: SCHEMA_VERSION });
    }
    serde_json::from_value(value).map_err(|e| StoreError::Corrupt(e.to_string()))
}

/// Holds serialized projects, so loading exercises the same encoding as the
/// persistent store.
#[derive(Default)]
pub struct MemoryStore {
    projects: Mutex<BTreeMap<String, String>>,
}

impl ProjectStore for MemoryStore {
    fn name(&self) -> &str {
        "memory"
    }

    fn save(&self, project: &Project) -> Result<(), StoreError> {
        let text = serde_json::to_string(project).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        self.projects.lock().unwrap().insert(project.id.clone(), text);
        Ok(())
    }

    fn load(&self, id: &str) -> Result<Project, StoreError> {
        let text = self
            .projects
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        decode(serde_json::from_str(&text).map_err(|e| StoreError::Corrupt(e.to_string()))?)
    }

    fn list(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.projects.lock().unwrap().keys().cloned().collect())
    }
}

/// Child collections and the table each is stored in.
const COLLECTIONS: [(&str, &str); 6] = [
    ("scenarios", "scenarios"),
    ("scripts", "scripts"),
    ("executions", "executions"),
    ("completions", "completions"),
    ("metric_records", "metric_records"),
    ("actions", "actions"),
];

pub struct SqliteStore {
    conn: Mutex<Connection>,
}

fn unavailable(e: rusqlite::Error) -> StoreError {
    StoreError::Unavailable(e.to_string())
}

impl SqliteStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::init(Connection::open(path).map_err(unavailable)?)
    }

    pub fn in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory().map_err(unavailable)?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        let mut ddl = String::from(
            "PRAGMA foreign_keys = ON;
             CREATE TABLE IF NOT EXISTS projects (
                 id TEXT PRIMARY KEY,
                 schema_version INTEGER NOT NULL,
                 payload TEXT NOT NULL
             );",
        );
        for (_, table) in COLLECTIONS {
            ddl.push_str(&format!(
                "CREATE TABLE IF NOT EXISTS {table} (
                     project_id TEXT NOT NULL REFERENCES projects(id) ON DELETE CASCADE,
                     position INTEGER NOT NULL,
                     id TEXT NOT NULL,
                     payload TEXT NOT NULL,
                     PRIMARY KEY (project_id, position)
                 );"
            ));
        }
        conn.execute_batch(&ddl).map_err(unavailable)?;
        Ok(SqliteStore { conn: Mutex::new(conn) })
    }
}

impl ProjectStore for SqliteStore {
    fn name(&self) -> &str {
        "sqlite"
    }

    fn save(&self, project: &Project) -> Result<(), StoreError> {
        let mut value = serde_json::to_value(project).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        let header = value.as_object_mut().expect("project serializes to an object");
        let mut children = Vec::new();
        for (field, table) in COLLECTIONS {
            let items = match header.remove(field) {
                Some(Value::Array(items)) => items,
                _ => Vec::new(),
            };
            children.push((table, items));
        }
        let mut conn = self.conn.lock().unwrap();
        let tx = conn.transaction().map_err(unavailable)?;
        tx.execute(
            "INSERT INTO projects (id, schema_version, payload) VALUES (?1, ?2, ?3)
             ON CONFLICT(id) DO UPDATE SET schema_version = excluded.schema_version, payload = excluded.payload",
            params![project.id, project.schema_version, Value::Object(header.clone()).to_string()],
        )
        .map_err(unavailable)?;
        for (table, items) in children {
            tx.execute(&format!("DELETE FROM {table} WHERE project_id = ?1"), params![project.id])
                .map_err(unavailable)?;
            let mut insert = tx
                .prepare(&format!("INSERT INTO {table} (project_id, position, id, payload) VALUES (?1, ?2, ?3, ?4)"))
                .map_err(unavailable)?;
            for (position, item) in items.iter().enumerate() {
                let id = item.get("id").and_then(Value::as_str).unwrap_or_default();
                insert
                    .execute(params![project.id, position as i64, id, item.to_string()])
                    .map_err(unavailable)?;
            }
        }
        tx.commit().map_err(unavailable)
    }

    fn load(&self, id: &str) -> Result<Project, StoreError> {
        let conn = self.conn.lock().unwrap();
        let header: Option<(u32, String)> = conn
            .query_row("SELECT schema_version, payload FROM projects WHERE id = ?1", params![id], |row| {
                Ok((row.get(0)?, row.get(1)?))
            })
            .optional()
            .map_err(unavailable)?;
        let (version, payload) = header.ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        if version != SCHEMA_VERSION {
            return Err(StoreError::VersionMismatch { found: version, expected: SCHEMA_VERSION });
        }
        let mut value: Value = serde_json::from_str(&payload).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        let header = value.as_object_mut().ok_or_else(|| StoreError::Corrupt("header is not an object".into()))?;
        for (field, table) in COLLECTIONS {
            let mut stmt = conn
                .prepare(&format!("SELECT payload FROM {table} WHERE project_id = ?1 ORDER BY position"))
                .map_err(unavailable)?;
            let rows = stmt
                .query_map(params![id], |row| row.get::<_, String>(0))
                .map_err(unavailable)?;
            let mut items = Vec::new();
            for row in rows {
                let text = row.map_err(unavailable)?;
                items.push(serde_json::from_str(&text).map_err(|e| StoreError::Corrupt(e.to_string()))?);
            }
            header.insert(field.to_string(), Value::Array(items));
        }
        decode(value)
    }

    fn list(&self) -> Result<Vec<String>, StoreError> {
        let conn = self.conn.lock().unwrap();
        let mut stmt = conn.prepare("SELECT id FROM projects ORDER BY id").map_err(unavailable)?;
        let rows = stmt.query_map([], |row| row.get::<_, String>(0)).map_err(unavailable)?;
        rows.collect::<Result<Vec<_>, _>>().map_err(unavailable)
    }
}

/// Builds a store from a location string, e.g. a database path.
pub type StoreFactory = Box<dyn Fn(Option<&str>) -> Result<Arc<dyn ProjectStore>, StoreError> + Send + Sync>;

pub struct StoreRegistry {
    factories: BTreeMap<String, StoreFactory>,
}

impl Default for StoreRegistry {
    fn default() -> Self {
        let mut registry = StoreRegistry { factories: BTreeMap::new() };
        registry.register("memory", Box::new(|_| Ok(Arc::new(MemoryStore::default()))));
        registry.register(
            "sqlite",
            Box::new(|location| {
                let store = match location {
                    Some(path) if path != ":memory:" => SqliteStore::open(path)?,
                    _ => SqliteStore::in_memory()?,
                };
                Ok(Arc::new(store))
            }),
        );
        registry
    }
}

impl StoreRegistry {
    pub fn register(&mut self, name: &str, factory: StoreFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, location: Option<&str>) -> Result<Arc<dyn ProjectStore>, StoreError> {
        let factory = self.factories.get(name).ok_or_else(|| StoreError::UnknownStore(name.to_string()))?;
        factory(location)
    }
}
