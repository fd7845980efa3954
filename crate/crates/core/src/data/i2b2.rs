//! Reader for i2b2 2014 de-identification style XML records.
//!
//! Expected layout, one record per file:
//!
//! ```xml
//! <deIdi2b2>
//!   <TEXT><![CDATA[ ...note text... ]]></TEXT>
//!   <TAGS>
//!     <NAME id="P0" start="16" end="23" text="Matthew" TYPE="DOCTOR" comment="" />
//!     <DATE id="P1" start="40" end="50" text="2067-05-03" TYPE="DATE" comment="" />
//!   </TAGS>
//! </deIdi2b2>
//! ```
//!
//! `start`/`end` are character (code point) offsets into the TEXT content,
//! converted here to byte offsets. The optional `text` attribute is checked
//! against the slice it claims to cover. Category comes from the element
//! name when it is one of the seven families, otherwise from `TYPE` via
//! [`map_i2b2_type`]; `TYPE` is kept as the span subtype.
//!
//! | TYPE values                                                            | category   |
//! |------------------------------------------------------------------------|------------|
//! | PATIENT, DOCTOR, USERNAME                                              | NAME       |
//! | PROFESSION                                                             | PROFESSION |
//! | HOSPITAL, ORGANIZATION, STREET, CITY, STATE, COUNTRY, ZIP, LOCATION-OTHER | LOCATION |
//! | AGE                                                                    | AGE        |
//! | DATE                                                                   | DATE       |
//! | PHONE, FAX, EMAIL, URL, IPADDR                                         | CONTACT    |
//! | SSN, MEDICALRECORD, HEALTHPLAN, ACCOUNT, LICENSE, VEHICLE, DEVICE, BIOID, IDNUM | ID  |

use std::fs;
use std::path::Path;

use super::{DataError, LabeledDocument, PhiCategory, PhiSpan};

pub fn map_i2b2_type(type_attr: &str) -> Option<PhiCategory> {
    use PhiCategory::*;
    Some(match type_attr.to_ascii_uppercase().as_str() {
        "PATIENT" | "DOCTOR" | "USERNAME" | "NAME" => Name,
        "PROFESSION" => Profession,
        "HOSPITAL" | "ORGANIZATION" | "STREET" | "CITY" | "STATE" | "COUNTRY" | "ZIP" | "LOCATION-OTHER"
        | "LOCATION" => Location,
        "AGE" => Age,
        "DATE" => Date,
        "PHONE" | "FAX" | "EMAIL" | "URL" | "IPADDR" | "CONTACT" => Contact,
        "SSN" | "MEDICALRECORD" | "HEALTHPLAN" | "ACCOUNT" | "LICENSE" | "VEHICLE" | "DEVICE" | "BIOID" | "IDNUM"
        | "ID" => Id,
        _ => return None,
    })
}

/// Result of loading a directory: documents in filename order, plus
/// per-file errors and per-tag warnings that did not stop the load.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct I2b2Load {
    pub documents: Vec<LabeledDocument>,
    pub errors: Vec<DataError>,
    pub warnings: Vec<String>,
}

fn char_to_byte(text: &str) -> Vec<usize> {
    let mut table: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    table.push(text.len());
    table
}

/// Parses one record. Bad tags are skipped and reported in `warnings`.
pub fn parse_i2b2_xml(id: &str, xml: &str, warnings: &mut Vec<String>) -> Result<LabeledDocument, DataError> {
    let xml_err = |message: String| DataError::Xml {
        file: id.to_string(),
        message,
    };
    let doc = roxmltree::Document::parse(xml).map_err(|e| xml_err(e.to_string()))?;
    let root = doc.root_element();
    let text_node = root
        .children()
        .find(|n| n.has_tag_name("TEXT"))
        .ok_or_else(|| xml_err("missing <TEXT> element".into()))?;
    let text: String = text_node
        .children()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();
    let offsets = char_to_byte(&text);
    let n_chars = offsets.len() - 1;

    let mut spans: Vec<PhiSpan> = Vec::new();
    if let Some(tags) = root.children().find(|n| n.has_tag_name("TAGS")) {
        for (i, tag) in tags.children().filter(|n| n.is_element()).enumerate() {
            let name = tag.tag_name().name();
            let warn = |w: &mut Vec<String>, why: String| w.push(format!("{id}: tag #{i} <{name}>: {why}; skipped"));
            let type_attr = tag.attribute("TYPE").unwrap_or(name);
            let category = name.parse::<PhiCategory>().ok().or_else(|| map_i2b2_type(type_attr));
            let Some(category) = category else {
                warn(warnings, format!("unmapped TYPE `{type_attr}`"));
                continue;
            };
            let parse = |attr: &str| tag.attribute(attr).and_then(|v| v.trim().parse::<usize>().ok());
            let (Some(start), Some(end)) = (parse("start"), parse("end")) else {
                warn(warnings, "missing or non-numeric start/end".into());
                continue;
            };
            if start >= end || end > n_chars {
                warn(warnings, format!("offsets {start}..{end} outside text of {n_chars} characters"));
                continue;
            }
            let (bs, be) = (offsets[start], offsets[end]);
            if let Some(claimed) = tag.attribute("text") {
                if claimed != &text[bs..be] {
                    warnings.push(format!(
                        "{id}: tag #{i} <{name}>: text attribute `{claimed}` differs from covered `{}`",
                        &text[bs..be]
                    ));
                }
            }
            spans.push(PhiSpan::new(bs, be, category).with_subtype(type_attr.to_ascii_uppercase()));
        }
    }
    spans.sort_by_key(|s| (s.start, s.end));
    let mut kept: Vec<PhiSpan> = Vec::with_capacity(spans.len());
    for s in spans {
        if kept.last().is_some_and(|prev| s.start < prev.end) {
            warnings.push(format!("{id}: span {}..{} overlaps an earlier tag; skipped", s.start, s.end));
            continue;
        }
        kept.push(s);
    }
    let doc = LabeledDocument {
        id: id.to_string(),
        text,
        phi_spans: kept,
    };
    doc.validate()?;
    Ok(doc)
}

/// Loads every `*.xml` file under `dir` (non-recursive), sorted by name.
pub fn load_i2b2_xml(dir: &Path) -> Result<I2b2Load, DataError> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| DataError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("xml")))
        .collect();
    files.sort();
    let mut out = I2b2Load::default();
    for path in files {
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let xml = match fs::read_to_string(&path) {
            Ok(x) => x,
            Err(e) => {
                out.errors.push(DataError::io(&path, e));
                continue;
            }
        };
        match parse_i2b2_xml(&id, &xml, &mut out.warnings) {
            Ok(doc) => out.documents.push(doc),
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}
