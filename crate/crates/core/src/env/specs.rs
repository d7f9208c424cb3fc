//! Tool specifications per domain: the stable, ordered tool lists and the
//! parameter contracts `invoke` validates against. The same specs are shown
//! to models (prompt tool lists, native function-calling).

use serde::{Deserialize, Serialize};

use crate::knowledge::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Text,
    Int,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolParam {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
}

impl ToolParam {
    fn required(name: &str, kind: ParamKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required: true,
        }
    }

    fn optional(name: &str, kind: ParamKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub domain: Domain,
    pub parameters: Vec<ToolParam>,
    pub description: String,
    pub returns: String,
}

impl ToolSpec {
    fn new(
        name: &str,
        domain: Domain,
        parameters: Vec<ToolParam>,
        description: &str,
        returns: &str,
    ) -> Self {
        Self {
            name: name.to_string(),
            domain,
            parameters,
            description: description.to_string(),
            returns: returns.to_string(),
        }
    }

    /// First required parameter, used when an action supplies a single
    /// positional argument.
    pub fn positional_parameter(&self) -> Option<&ToolParam> {
        self.parameters.iter().find(|p| p.required)
    }

    /// One-line rendering for prompt tool lists.
    pub fn prompt_line(&self) -> String {
        let params: Vec<String> = self
            .parameters
            .iter()
            .map(|p| {
                if p.required {
                    p.name.clone()
                } else {
                    format!("{}?", p.name)
                }
            })
            .collect();
        format!("{}[{}]: {}", self.name, params.join(", "), self.description)
    }
}

/// The fixed tool list for a domain, in stable order.
pub fn tool_specs(domain: Domain) -> Vec<ToolSpec> {
    match domain {
        Domain::Wiki => wiki_specs(),
        Domain::Aminer => aminer_specs(),
    }
}

fn wiki_specs() -> Vec<ToolSpec> {
    vec![
        ToolSpec::new(
            "Search",
            Domain::Wiki,
            vec![ToolParam::required("entity", ParamKind::Text)],
            "search for an article by entity name",
            "the article's abstract, or a list of possibly related entities",
        ),
        ToolSpec::new(
            "Lookup",
            Domain::Wiki,
            vec![ToolParam::required("keyword", ParamKind::Text)],
            "return the next sentence containing the keyword in the last searched article",
            "one matching sentence, or 'No more results.'",
        ),
        ToolSpec::new(
            "Finish",
            Domain::Wiki,
            vec![ToolParam::required("answer", ParamKind::Text)],
            "finish the task with a final answer",
            "echo of the answer; the session accepts no further calls",
        ),
    ]
}

fn aminer_specs() -> Vec<ToolSpec> {
    vec![
        ToolSpec::new(
            "searchPerson",
            Domain::Aminer,
            vec![
                ToolParam::required("name", ParamKind::Text),
                ToolParam::optional("organization", ParamKind::Text),
                ToolParam::optional("interest", ParamKind::Text),
            ],
            "search scholars by name, organization and interest",
            "for each match: id, name, citation_count, publication_count",
        ),
        ToolSpec::new(
            "searchPublication",
            Domain::Aminer,
            vec![
                ToolParam::required("title", ParamKind::Text),
                ToolParam::optional("year", ParamKind::Int),
            ],
            "search publications by title and year",
            "for each match: id, title, year",
        ),
        ToolSpec::new(
            "getCoauthors",
            Domain::Aminer,
            vec![ToolParam::required("id", ParamKind::Text)],
            "list the coauthors of a scholar",
            "for each coauthor: id, name, relation",
        ),
        ToolSpec::new(
            "getPersonInterest",
            Domain::Aminer,
            vec![ToolParam::required("id", ParamKind::Text)],
            "list a scholar's research interests",
            "the scholar's interest list",
        ),
        ToolSpec::new(
            "getPublication",
            Domain::Aminer,
            vec![ToolParam::required("id", ParamKind::Text)],
            "fetch one publication's details",
            "title, year, abstract, authors, citation_count",
        ),
        ToolSpec::new(
            "getPersonBasicInfo",
            Domain::Aminer,
            vec![ToolParam::required("id", ParamKind::Text)],
            "fetch a scholar's profile",
            "name, gender, organization, position, bio, education, email",
        ),
        ToolSpec::new(
            "getPersonPubs",
            Domain::Aminer,
            vec![ToolParam::required("id", ParamKind::Text)],
            "list a scholar's publications",
            "for each publication: id, title, citation_count, authors",
        ),
    ]
}
