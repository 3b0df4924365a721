//! Direct-identifier rules as they appear in run configs: literal by
//! default, regex on request.

use std::ops::Range;

use entswap_core::corpus::{validate_placeholder, Matcher, SuppressionRule};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub pattern: String,
    pub placeholder: String,
    #[serde(default)]
    pub case_insensitive: bool,
    #[serde(default)]
    pub regex: bool,
}

#[derive(Debug, Clone)]
pub struct RegexRule {
    regex: Regex,
    placeholder: String,
}

impl RegexRule {
    pub fn new(pattern: &str, placeholder: impl Into<String>, case_insensitive: bool) -> Result<Self> {
        let placeholder = placeholder.into();
        validate_placeholder(&placeholder)?;
        let regex = RegexBuilder::new(pattern)
            .case_insensitive(case_insensitive)
            .build()
            .map_err(|e| AppError::Config(format!("rule {pattern:?}: {e}")))?;
        Ok(RegexRule { regex, placeholder })
    }
}

impl Matcher for RegexRule {
    fn placeholder(&self) -> &str {
        &self.placeholder
    }

    fn find_all(&self, haystack: &str) -> Vec<Range<usize>> {
        self.regex.find_iter(haystack).map(|m| m.range()).filter(|r| !r.is_empty()).collect()
    }
}

#[derive(Debug, Clone)]
pub enum Rule {
    Literal(SuppressionRule),
    Regex(RegexRule),
}

impl Rule {
    pub fn from_spec(spec: &RuleSpec) -> Result<Self> {
        if spec.regex {
            Ok(Rule::Regex(RegexRule::new(&spec.pattern, spec.placeholder.clone(), spec.case_insensitive)?))
        } else {
            Ok(Rule::Literal(SuppressionRule::new(
                spec.pattern.clone(),
                spec.placeholder.clone(),
                spec.case_insensitive,
            )?))
        }
    }
}

impl Matcher for Rule {
    fn placeholder(&self) -> &str {
        match self {
            Rule::Literal(r) => r.placeholder(),
            Rule::Regex(r) => r.placeholder(),
        }
    }

    fn find_all(&self, haystack: &str) -> Vec<Range<usize>> {
        match self {
            Rule::Literal(r) => r.find_all(haystack),
            Rule::Regex(r) => r.find_all(haystack),
        }
    }
}
