//! Long-running agent and executor calls, tracked as pollable tasks.

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::task::JoinHandle;

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub kind: String,
    pub target_id: String,
    pub status: TaskStatus,
    pub result: Option<Value>,
    pub error: Option<ApiError>,
}

#[derive(Default)]
pub struct TaskRegistry {
    tasks: Mutex<BTreeMap<String, TaskRecord>>,
    counter: Mutex<u64>,
}

impl TaskRegistry {
    /// Registers a running task and drives `work` to completion on the
    /// runtime. The handle resolves to the finished record.
    pub fn spawn<F>(self: &Arc<Self>, kind: &str, target_id: &str, work: F) -> (String, JoinHandle<TaskRecord>)
    where
        F: Future<Output = Result<Value, ApiError>> + Send + 'static,
    {
        let id = {
            let mut counter = self.counter.lock().unwrap();
            *counter += 1;
            format!("task-{counter}")
        };
        let record = TaskRecord {
            id: id.clone(),
            kind: kind.to_string(),
            target_id: target_id.to_string(),
            status: TaskStatus::Running,
            result: None,
            error: None,
        };
        self.tasks.lock().unwrap().insert(id.clone(), record);
        let registry = self.clone();
        let task_id = id.clone();
        let handle = tokio::spawn(async move {
            let outcome = work.await;
            let mut tasks = registry.tasks.lock().unwrap();
            let record = tasks.get_mut(&task_id).expect("task registered before spawn");
            match outcome {
                Ok(value) => {
                    record.status = TaskStatus::Succeeded;
                    record.result = Some(value);
                }
                Err(error) => {
                    record.status = TaskStatus::Failed;
                    record.error = Some(error);
                }
            }
            record.clone()
        });
        (id, handle)
    }

    /// Number of tasks started so far.
    pub fn len(&self) -> usize {
        self.tasks.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<TaskRecord> {
        self.tasks.lock().unwrap().get(id).cloned()
    }
}
