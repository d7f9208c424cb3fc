//! Optional remote mode: the same invoke contract over HTTP. The server
//! hosts one session per instance; the client turns transport problems into
//! internal-fault observations, so workflows never see an exception.
//! Fixture-backed local sessions remain the tested path.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::knowledge::KnowledgeBase;

use super::{open_session, ArgValue, EnvSession, FaultPlan, Observation, ToolCall};

#[derive(Debug, Serialize, Deserialize)]
struct InvokeBody {
    tool: String,
    #[serde(default)]
    arguments: BTreeMap<String, ArgValue>,
}

/// Client with the same invoke signature as [`EnvSession`], speaking
/// `POST /invoke` with body `{tool, arguments}` and reading back
/// `{text, structured, fault}`.
pub struct RemoteEnv {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteEnv {
    /// `base_url` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base_url: &str) -> Self {
        Self {
            endpoint: format!("{}/invoke", base_url.trim_end_matches('/')),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .build(),
        }
    }

    pub fn invoke(&mut self, call: &ToolCall) -> Observation {
        let body = InvokeBody {
            tool: call.tool.clone(),
            arguments: call.arguments.clone(),
        };
        let payload = match serde_json::to_value(&body) {
            Ok(v) => v,
            Err(e) => return Observation::internal_fault(format!("request serialization: {e}")),
        };
        match self.agent.post(&self.endpoint).send_json(payload) {
            Ok(response) => match response.into_json::<Observation>() {
                Ok(obs) => obs,
                Err(e) => Observation::internal_fault(format!("remote protocol: {e}")),
            },
            Err(e) => Observation::internal_fault(format!("remote transport: {e}")),
        }
    }
}

/// A running environment server. Dropping it stops the accept loop.
pub struct EnvServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl EnvServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for EnvServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

/// Serve one session over HTTP. Bind to port 0 to pick a free port.
pub fn serve(
    kb: Arc<KnowledgeBase>,
    bind: &str,
    fault_plan: Option<FaultPlan>,
) -> std::io::Result<EnvServer> {
    let server = Arc::new(
        tiny_http::Server::http(bind)
            .map_err(|e| std::io::Error::other(format!("bind {bind}: {e}")))?,
    );
    let addr = match server.server_addr() {
        tiny_http::ListenAddr::IP(addr) => addr,
        other => return Err(std::io::Error::other(format!("unsupported listener {other:?}"))),
    };
    let session = Mutex::new(open_session(kb, fault_plan));
    let loop_server = Arc::clone(&server);
    let handle = std::thread::spawn(move || {
        let mut ordinal = 0usize;
        while let Ok(mut request) = loop_server.recv() {
            let response = handle_request(&mut request, &session, &mut ordinal);
            let _ = request.respond(response);
        }
    });
    Ok(EnvServer {
        server,
        addr,
        handle: Some(handle),
    })
}

fn handle_request(
    request: &mut tiny_http::Request,
    session: &Mutex<EnvSession>,
    ordinal: &mut usize,
) -> tiny_http::Response<std::io::Cursor<Vec<u8>>> {
    let observation = if request.method() != &tiny_http::Method::Post
        || request.url().trim_end_matches('/') != "/invoke"
    {
        Observation::misuse(format!(
            "unsupported endpoint: {} {}",
            request.method(),
            request.url()
        ))
    } else {
        let mut body = String::new();
        if request.as_reader().read_to_string(&mut body).is_err() {
            Observation::misuse("unreadable request body")
        } else {
            match serde_json::from_str::<InvokeBody>(&body) {
                Ok(invoke) => {
                    *ordinal += 1;
                    let call = ToolCall::new(invoke.tool, invoke.arguments, *ordinal);
                    session.lock().expect("session poisoned").invoke(&call)
                }
                Err(e) => Observation::misuse(format!("unparseable request body: {e}")),
            }
        }
    };
    let body = serde_json::to_vec(&observation).expect("observation serializes");
    tiny_http::Response::from_data(body).with_header(
        tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap(),
    )
}
