use crate::prefixes::PrefixMap;

use super::{ClassShape, PredicateShape};

/// Render a class shape as ShEx-like text, one predicate per line:
///
/// ```text
/// up:Disease_Annotation {
///   a [ up:Disease_Annotation ] ;
///   up:sequence [ up:Chain_Annotation up:Modified_Sequence ] ;
///   rdfs:comment xsd:string ;
///   up:disease IRI
/// }
/// ```
///
/// Object classes are bracketed, datatypes bare, untyped IRIs `IRI` and
/// plain literals `Literal`. No trailing newline.
pub fn render_shex(shape: &ClassShape, prefixes: &PrefixMap) -> String {
    let class = prefixes.compact(&shape.class_iri);
    let mut lines = vec![format!("a [ {class} ]")];
    lines.extend(shape.predicates.iter().map(|p| predicate_line(p, prefixes)));
    format!("{class} {{\n  {}\n}}", lines.join(" ;\n  "))
}

fn predicate_line(p: &PredicateShape, prefixes: &PrefixMap) -> String {
    let mut parts = vec![prefixes.compact(&p.predicate)];
    if !p.object_classes.is_empty() {
        let classes: Vec<String> = p.object_classes.iter().map(|c| prefixes.compact(c)).collect();
        parts.push(format!("[ {} ]", classes.join(" ")));
    }
    parts.extend(p.object_datatypes.iter().map(|d| prefixes.compact(d)));
    if p.has_untyped_iri_objects {
        parts.push("IRI".to_string());
    }
    if p.has_plain_literal_objects {
        parts.push("Literal".to_string());
    }
    parts.join(" ")
}
