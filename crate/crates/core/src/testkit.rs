//! Fixtures shared by unit tests.

use crate::accounts::{Caller, Role};
use crate::corpus::{NewText, TextDocument};
use crate::ids::ThemeId;
use crate::lom::LomRecord;
use crate::platform::{Platform, PlatformConfig};
use crate::store::Store;
use crate::taxonomy::Taxonomy;
use std::sync::Arc;

pub const SENTENCE: &str = "ذهب محمد ثم عاد";

pub struct Fixture {
    pub p: Platform,
    pub admin: Caller,
    pub teacher: Caller,
    pub theme: ThemeId,
}

impl Fixture {
    pub fn new() -> Self {
        Self::with_config(PlatformConfig::default())
    }

    pub fn with_config(config: PlatformConfig) -> Self {
        Self::build(Platform::in_memory(config))
    }

    pub fn with_store(store: Store) -> Self {
        Self::build(Platform::new(store, PlatformConfig::default()))
    }

    fn build(p: Platform) -> Self {
        let admin = p
            .bootstrap_admin("admin", "admin-password")
            .unwrap()
            .unwrap();
        let admin = p.caller_for(admin.id).unwrap();
        let t1 = p
            .create_account(&admin, "t1", "s3cretpw1", Role::Teacher)
            .unwrap();
        let teacher = p.caller_for(t1.id).unwrap();
        let theme = p.create_theme(&admin, "سياسة").unwrap().id;
        Self {
            p,
            admin,
            teacher,
            theme,
        }
    }

    pub fn text(&self, body: &str) -> Arc<TextDocument> {
        self.p
            .ingest_text(
                &self.teacher,
                NewText {
                    title: "نص",
                    body: body.as_bytes(),
                    theme_id: self.theme,
                    lom: LomRecord::default(),
                },
            )
            .unwrap()
    }

    pub fn taxonomy(&self, name: &str, entries: &[&str]) -> Taxonomy {
        self.p
            .create_taxonomy(
                &self.teacher,
                name,
                entries.iter().map(|s| s.to_string()).collect(),
            )
            .unwrap()
    }

    pub fn student(&self, login: &str) -> Caller {
        let u = self
            .p
            .create_account(&self.admin, login, "student-pw", Role::Student)
            .unwrap();
        self.p.caller_for(u.id).unwrap()
    }
}
