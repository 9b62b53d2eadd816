//! Does an endpoint publish what indexing needs?

use serde::{Deserialize, Serialize};

use crate::endpoint::{ResultsSource, SparqlClient};
use crate::kb_index::{endpoint_info_from_html, examples_from_results, EXAMPLES_QUERY};

use super::{void_rows_from_results, VOID_QUERY};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Probe {
    fn counted(count: usize, what: &str) -> Self {
        Probe {
            present: count > 0,
            count: Some(count),
            reason: (count == 0).then(|| format!("no {what} found")),
        }
    }

    fn failed(reason: impl ToString) -> Self {
        Probe {
            present: false,
            count: None,
            reason: Some(reason.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataReport {
    pub endpoint: String,
    pub has_examples: Probe,
    pub has_void: Probe,
    pub has_homepage_info: Probe,
}

/// Run the example, VoID and homepage probes concurrently. Never fails;
/// each probe records its own error.
pub async fn check_endpoint_metadata(client: &SparqlClient, endpoint: &str) -> MetadataReport {
    let source = ResultsSource::Endpoint(endpoint.to_string());
    let examples = async {
        match client.results(&source, EXAMPLES_QUERY).await {
            Ok(r) => Probe::counted(examples_from_results(&r, endpoint).docs.len(), "example queries"),
            Err(e) => Probe::failed(e),
        }
    };
    let void = async {
        match client.results(&source, VOID_QUERY).await {
            Ok(r) => Probe::counted(void_rows_from_results(&r).len(), "VoID rows"),
            Err(e) => Probe::failed(e),
        }
    };
    let homepage = async {
        match client.get_text(endpoint, "text/html").await {
            Ok(html) => match endpoint_info_from_html(&html, endpoint) {
                Some(_) => Probe {
                    present: true,
                    count: None,
                    reason: None,
                },
                None => Probe::failed("homepage has no schema.org JSON-LD name or description"),
            },
            Err(e) => Probe::failed(e),
        }
    };
    let (has_examples, has_void, has_homepage_info) = tokio::join!(examples, void, homepage);
    MetadataReport {
        endpoint: endpoint.to_string(),
        has_examples,
        has_void,
        has_homepage_info,
    }
}
