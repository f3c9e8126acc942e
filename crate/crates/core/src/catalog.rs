//! The built-in relation catalog.
//!
//! Four relations ship fully implemented; the remaining planned entries are
//! listed by name so tooling can report coverage of the OWASP testing guide
//! activities they map to.

use std::collections::BTreeMap;

use crate::dsl::{self, RelationAst};

macro_rules! catalog_src {
    ($file:literal) => {
        (
            $file,
            include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../catalog/", $file)),
        )
    };
}

/// File name and source text of every shipped relation.
pub const SOURCES: &[(&str, &str)] = &[
    catalog_src!("otg_authn_001.smrl"),
    catalog_src!("otg_authz_001.smrl"),
    catalog_src!("otg_authz_002.smrl"),
    catalog_src!("otg_sess_003.smrl"),
];

/// Catalog entries covered by name only: the OWASP activities the full
/// catalog extends to, kept here so `catalog list` can show the roadmap.
pub const PLANNED: &[&str] = &[
    "OTG_AUTHN_004",
    "OTG_AUTHN_010",
    "OTG_AUTHZ_003",
    "OTG_AUTHZ_004",
    "OTG_BUSLOGIC_005",
    "OTG_CONFIG_007",
    "OTG_CRYPST_004",
    "OTG_INPVAL_003",
    "OTG_INPVAL_004",
    "OTG_SESS_006",
    "OTG_SESS_007",
    "OTG_SESS_008",
];

/// Parses and checks the shipped catalog, returning relations keyed by
/// unqualified name. The sources are embedded at compile time, so failure
/// here is a build defect and panics.
pub fn load() -> BTreeMap<String, RelationAst> {
    let mut out = BTreeMap::new();
    for (file, src) in SOURCES {
        let relations = dsl::parse(src)
            .unwrap_or_else(|e| panic!("embedded catalog file {file} does not parse: {e}"));
        let diags = dsl::check(file, &relations);
        assert!(
            diags.is_empty(),
            "embedded catalog file {file} has check errors: {:?}",
            diags
        );
        for rel in relations {
            let prev = out.insert(rel.name.clone(), rel);
            assert!(prev.is_none(), "duplicate catalog relation in {file}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_exactly_four_relations() {
        let catalog = load();
        let names: Vec<&str> = catalog.keys().map(|s| s.as_str()).collect();
        assert_eq!(
            names,
            ["OTG_AUTHN_001", "OTG_AUTHZ_001", "OTG_AUTHZ_002", "OTG_SESS_003"]
        );
    }

    #[test]
    fn catalog_is_in_owasp_package() {
        for rel in load().values() {
            assert_eq!(rel.package.as_deref(), Some("owasp"));
        }
    }

    #[test]
    fn planned_names_do_not_collide_with_shipped() {
        let catalog = load();
        for name in PLANNED {
            assert!(!catalog.contains_key(*name));
        }
    }

    #[test]
    fn printing_catalog_roundtrips() {
        for (_, src) in SOURCES {
            let rels = dsl::parse(src).unwrap();
            let printed = dsl::print(&rels);
            assert_eq!(dsl::parse(&printed).unwrap(), rels);
        }
    }
}
