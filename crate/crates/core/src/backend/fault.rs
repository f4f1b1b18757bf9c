use std::sync::atomic::{AtomicU64, Ordering};

use super::{
    BackendError, BackendErrorKind, BackendRequest, BackendResponse, Capability, GenerativeBackend,
    TaskName,
};

type Rule = dyn Fn(&BackendRequest, u64) -> bool + Send + Sync;

/// Wraps a backend and fails the calls a rule selects. The rule sees the
/// request and the zero-based index of the call.
pub struct FaultyBackend<B> {
    inner: B,
    rule: Box<Rule>,
    calls: AtomicU64,
}

impl<B: GenerativeBackend> FaultyBackend<B> {
    pub fn new(inner: B, rule: impl Fn(&BackendRequest, u64) -> bool + Send + Sync + 'static) -> Self {
        FaultyBackend {
            inner,
            rule: Box::new(rule),
            calls: AtomicU64::new(0),
        }
    }

    /// Fails every call for `task`.
    pub fn failing_task(inner: B, task: TaskName) -> Self {
        Self::new(inner, move |r, _| r.task == task)
    }

    /// Fails only the call with index `n`.
    pub fn failing_call(inner: B, n: u64) -> Self {
        Self::new(inner, move |_, i| i == n)
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: GenerativeBackend> GenerativeBackend for FaultyBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn capabilities(&self) -> &[Capability] {
        self.inner.capabilities()
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let index = self.calls.fetch_add(1, Ordering::SeqCst);
        if (self.rule)(request, index) {
            return Err(BackendError::new(
                BackendErrorKind::Failed,
                format!("injected failure on call {index} ({})", request.task),
            ));
        }
        self.inner.complete(request)
    }
}
