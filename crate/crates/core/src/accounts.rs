//! Users, roles, credentials, sessions, exam monitoring and performance
//! history.

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Duration;

use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::activity::AssignmentStatus;
use crate::error::{Error, Result};
use crate::ids::{ExamId, UserId};
use crate::performance::Performance;
use crate::platform::Platform;
use crate::store::Mutation;

pub const MIN_PASSWORD_CHARS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Admin,
    Teacher,
    Student,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub login: String,
    /// PHC-format argon2id digest. Never the plaintext.
    pub password_digest: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
    pub active: bool,
}

/// What API responses show about a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub login: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
    pub active: bool,
}

impl From<&User> for UserProfile {
    fn from(u: &User) -> Self {
        Self {
            id: u.id,
            login: u.login.clone(),
            role: u.role,
            created_at: u.created_at,
            active: u.active,
        }
    }
}

/// An authenticated principal. Only obtainable for active users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caller {
    pub user_id: UserId,
    pub role: Role,
}

impl Caller {
    pub fn require_admin(&self) -> Result<()> {
        match self.role {
            Role::Admin => Ok(()),
            _ => Err(Error::NotAuthorized),
        }
    }

    /// Teachers and admins author texts, taxonomies, annotations and activities.
    pub fn require_author(&self) -> Result<()> {
        match self.role {
            Role::Admin | Role::Teacher => Ok(()),
            Role::Student => Err(Error::NotAuthorized),
        }
    }

    /// Students may only see their own data.
    pub fn require_view_student(&self, student: UserId) -> Result<()> {
        match self.role {
            Role::Admin | Role::Teacher => Ok(()),
            Role::Student if self.user_id == student => Ok(()),
            Role::Student => Err(Error::NotAuthorized),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub token: String,
    pub user_id: UserId,
    pub role: Role,
    pub expires_at: DateTime<Utc>,
}

/// In-memory session table. Sessions do not survive a restart.
#[derive(Default)]
pub struct SessionTable {
    sessions: RwLock<HashMap<String, SessionToken>>,
}

impl SessionTable {
    fn issue(&self, user: &User, ttl: Duration) -> SessionToken {
        let mut bytes = [0u8; 32];
        OsRng.fill_bytes(&mut bytes);
        let token: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
        let ttl = chrono::Duration::from_std(ttl).unwrap_or(chrono::Duration::MAX);
        let session = SessionToken {
            token: token.clone(),
            user_id: user.id,
            role: user.role,
            expires_at: Utc::now()
                .checked_add_signed(ttl)
                .unwrap_or(DateTime::<Utc>::MAX_UTC),
        };
        self.sessions.write().insert(token, session.clone());
        session
    }

    fn get(&self, token: &str) -> Option<SessionToken> {
        self.sessions.read().get(token).cloned()
    }

    fn revoke(&self, token: &str) -> bool {
        self.sessions.write().remove(token).is_some()
    }

    fn revoke_user(&self, user: UserId) {
        self.sessions.write().retain(|_, s| s.user_id != user);
    }

    fn purge_expired(&self, now: DateTime<Utc>) {
        self.sessions.write().retain(|_, s| s.expires_at > now);
    }
}

fn hash_password(password: &str) -> Result<String> {
    let salt = SaltString::generate(&mut OsRng);
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(|e| Error::Hashing(e.to_string()))
}

fn verify_password(password: &str, digest: &str) -> bool {
    PasswordHash::new(digest)
        .map(|parsed| {
            Argon2::default()
                .verify_password(password.as_bytes(), &parsed)
                .is_ok()
        })
        .unwrap_or(false)
}

/// Digest checked against when the login is unknown, so both failure paths
/// cost one argon2 verification.
fn decoy_digest() -> &'static str {
    static DECOY: OnceLock<String> = OnceLock::new();
    DECOY.get_or_init(|| hash_password("decoy-password-never-matches").expect("argon2 defaults"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExamStatusRow {
    pub assignment_id: crate::ids::AssignmentId,
    pub exam_id: ExamId,
    pub status: AssignmentStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistoryEntry {
    pub exam_id: ExamId,
    pub accomplished_at: DateTime<Utc>,
    pub correct_count: u64,
    pub question_count: u64,
    pub performance: Performance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerformanceHistory {
    pub student_id: UserId,
    pub entries: Vec<HistoryEntry>,
}

impl Platform {
    /// Creates the first admin account when no active admin exists yet.
    /// Returns `None` when an admin is already present.
    pub fn bootstrap_admin(&self, login: &str, password: &str) -> Result<Option<User>> {
        let _serial = self.account_lock.lock();
        let tables = self.store.snapshot();
        if tables
            .users
            .values()
            .any(|u| u.active && u.role == Role::Admin)
        {
            return Ok(None);
        }
        self.insert_user(login, password, Role::Admin).map(Some)
    }

    pub fn create_account(
        &self,
        caller: &Caller,
        login: &str,
        password: &str,
        role: Role,
    ) -> Result<User> {
        caller.require_admin()?;
        let _serial = self.account_lock.lock();
        self.insert_user(login, password, role)
    }

    fn insert_user(&self, login: &str, password: &str, role: Role) -> Result<User> {
        let login = login.trim();
        if login.is_empty() {
            return Err(Error::EmptyLogin);
        }
        if password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(Error::WeakPassword(MIN_PASSWORD_CHARS));
        }
        if self.store.snapshot().active_user_by_login(login).is_some() {
            return Err(Error::DuplicateLogin(login.to_owned()));
        }
        let user = User {
            id: UserId::new(),
            login: login.to_owned(),
            password_digest: hash_password(password)?,
            role,
            created_at: Utc::now(),
            active: true,
        };
        self.store.transact(vec![Mutation::PutUser(user.clone())])?;
        Ok(user)
    }

    /// Issues a session token. Unknown logins, inactive accounts and wrong
    /// passwords all fail with the same `InvalidCredentials`.
    pub fn authenticate(&self, login: &str, password: &str) -> Result<SessionToken> {
        let tables = self.store.snapshot();
        let user = tables.active_user_by_login(login.trim()).cloned();
        let digest = user
            .as_ref()
            .map_or(decoy_digest(), |u| u.password_digest.as_str());
        let matches = verify_password(password, digest);
        match user {
            Some(user) if matches => {
                self.sessions.purge_expired(Utc::now());
                Ok(self.sessions.issue(&user, self.config.session_ttl))
            }
            _ => Err(Error::InvalidCredentials),
        }
    }

    pub fn logout(&self, token: &str) -> bool {
        self.sessions.revoke(token)
    }

    /// Resolves a bearer token to its caller. Expired tokens and tokens of
    /// deactivated users are rejected.
    pub fn resolve_session(&self, token: &str) -> Result<Caller> {
        let session = self.sessions.get(token).ok_or(Error::Unauthenticated)?;
        if session.expires_at <= Utc::now() {
            self.sessions.revoke(token);
            return Err(Error::Unauthenticated);
        }
        self.caller_for(session.user_id)
            .map_err(|_| Error::Unauthenticated)
    }

    /// Builds a caller for an active user without a session (CLI and tests).
    pub fn caller_for(&self, user_id: UserId) -> Result<Caller> {
        let tables = self.store.snapshot();
        match tables.users.get(&user_id) {
            Some(u) if u.active => Ok(Caller {
                user_id,
                role: u.role,
            }),
            _ => Err(Error::UnknownUser(user_id)),
        }
    }

    pub fn user(&self, user_id: UserId) -> Result<User> {
        self.store
            .snapshot()
            .users
            .get(&user_id)
            .cloned()
            .ok_or(Error::UnknownUser(user_id))
    }

    /// Soft delete: the account is deactivated and its sessions revoked;
    /// everything it authored or was graded on stays.
    pub fn delete_account(&self, caller: &Caller, user_id: UserId) -> Result<User> {
        caller.require_admin()?;
        let _serial = self.account_lock.lock();
        let mut user = self.user(user_id)?;
        if !user.active {
            return Err(Error::UnknownUser(user_id));
        }
        user.active = false;
        self.store.transact(vec![Mutation::PutUser(user.clone())])?;
        self.sessions.revoke_user(user_id);
        Ok(user)
    }

    /// A known student record, active or not. Deleted students keep their
    /// history visible to staff.
    fn student_record(&self, student_id: UserId) -> Result<User> {
        let user = self.user(student_id)?;
        if user.role != Role::Student {
            return Err(Error::UnknownUser(student_id));
        }
        Ok(user)
    }

    pub fn monitor_exams(&self, caller: &Caller, student_id: UserId) -> Result<Vec<ExamStatusRow>> {
        caller.require_view_student(student_id)?;
        self.student_record(student_id)?;
        let tables = self.store.snapshot();
        let mut rows: Vec<_> = tables
            .assignments_of(student_id)
            .map(|a| (a.assigned_at, a.id, a.exam_id, a.status))
            .collect();
        rows.sort();
        Ok(rows
            .into_iter()
            .map(|(_, assignment_id, exam_id, status)| ExamStatusRow {
                assignment_id,
                exam_id,
                status,
            })
            .collect())
    }

    pub fn performance_history(
        &self,
        caller: &Caller,
        student_id: UserId,
    ) -> Result<PerformanceHistory> {
        caller.require_view_student(student_id)?;
        self.student_record(student_id)?;
        let tables = self.store.snapshot();
        let mut entries: Vec<_> = tables
            .assignments_of(student_id)
            .filter_map(|a| {
                let at = a.accomplished_at?;
                let report = tables.reports.get(&a.id)?;
                Some((at, a.id, report))
            })
            .collect();
        entries.sort_by_key(|(at, id, _)| (*at, *id));
        Ok(PerformanceHistory {
            student_id,
            entries: entries
                .into_iter()
                .map(|(accomplished_at, _, r)| HistoryEntry {
                    exam_id: r.exam_id,
                    accomplished_at,
                    correct_count: r.correct_count,
                    question_count: r.question_count,
                    performance: r.performance,
                })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::PlatformConfig;

    fn platform_with_admin() -> (Platform, Caller) {
        let p = Platform::in_memory(PlatformConfig::default());
        let admin = p
            .bootstrap_admin("admin", "admin-password")
            .unwrap()
            .unwrap();
        let caller = p.caller_for(admin.id).unwrap();
        (p, caller)
    }

    #[test]
    fn bootstrap_only_once() {
        let (p, _) = platform_with_admin();
        assert!(p
            .bootstrap_admin("other", "admin-password")
            .unwrap()
            .is_none());
    }

    #[test]
    fn create_account_rules() {
        let (p, admin) = platform_with_admin();
        let t1 = p
            .create_account(&admin, "t1", "s3cretpw1", Role::Teacher)
            .unwrap();
        assert_eq!(t1.role, Role::Teacher);
        assert!(!t1.password_digest.contains("s3cretpw1"));
        assert!(matches!(
            p.create_account(&admin, "t1", "s3cretpw1", Role::Teacher),
            Err(Error::DuplicateLogin(_))
        ));
        assert!(matches!(
            p.create_account(&admin, "s1", "abc", Role::Student),
            Err(Error::WeakPassword(8))
        ));
        let teacher = p.caller_for(t1.id).unwrap();
        assert!(matches!(
            p.create_account(&teacher, "s1", "longenough", Role::Student),
            Err(Error::NotAuthorized)
        ));
    }

    #[test]
    fn authentication_failures_are_uniform() {
        let (p, admin) = platform_with_admin();
        let t1 = p
            .create_account(&admin, "t1", "s3cretpw1", Role::Teacher)
            .unwrap();
        let session = p.authenticate("t1", "s3cretpw1").unwrap();
        assert_eq!(session.user_id, t1.id);
        assert!(session.token.len() >= 32);
        assert_eq!(p.resolve_session(&session.token).unwrap().user_id, t1.id);

        let wrong = p.authenticate("t1", "wrong").unwrap_err();
        let ghost = p.authenticate("ghost", "x").unwrap_err();
        assert_eq!(wrong.code(), ghost.code());
        assert_eq!(wrong.to_string(), ghost.to_string());
    }

    #[test]
    fn tokens_are_random() {
        let (p, _) = platform_with_admin();
        let a = p.authenticate("admin", "admin-password").unwrap();
        let b = p.authenticate("admin", "admin-password").unwrap();
        assert_ne!(a.token, b.token);
    }

    #[test]
    fn expired_sessions_are_rejected() {
        let p = Platform::in_memory(PlatformConfig {
            session_ttl: Duration::ZERO,
            ..PlatformConfig::default()
        });
        p.bootstrap_admin("admin", "admin-password").unwrap();
        let s = p.authenticate("admin", "admin-password").unwrap();
        assert!(matches!(
            p.resolve_session(&s.token),
            Err(Error::Unauthenticated)
        ));
    }

    #[test]
    fn soft_delete_revokes_sessions_and_frees_login() {
        let (p, admin) = platform_with_admin();
        let s1 = p
            .create_account(&admin, "s1", "student-pw", Role::Student)
            .unwrap();
        let session = p.authenticate("s1", "student-pw").unwrap();

        let teacher = p
            .create_account(&admin, "t1", "s3cretpw1", Role::Teacher)
            .unwrap();
        let teacher = p.caller_for(teacher.id).unwrap();
        assert!(matches!(
            p.delete_account(&teacher, s1.id),
            Err(Error::NotAuthorized)
        ));
        assert!(matches!(
            p.delete_account(&admin, UserId::new()),
            Err(Error::UnknownUser(_))
        ));

        let gone = p.delete_account(&admin, s1.id).unwrap();
        assert!(!gone.active);
        assert!(p.user(s1.id).is_ok());
        assert!(matches!(
            p.resolve_session(&session.token),
            Err(Error::Unauthenticated)
        ));
        assert!(matches!(
            p.authenticate("s1", "student-pw"),
            Err(Error::InvalidCredentials)
        ));
        // history of a deleted student stays readable for staff
        assert!(p
            .performance_history(&teacher, s1.id)
            .unwrap()
            .entries
            .is_empty());
        p.create_account(&admin, "s1", "student-pw2", Role::Student)
            .unwrap();
    }

    #[test]
    fn students_only_see_themselves() {
        let (p, admin) = platform_with_admin();
        let s1 = p
            .create_account(&admin, "s1", "student-pw", Role::Student)
            .unwrap();
        let s2 = p
            .create_account(&admin, "s2", "student-pw", Role::Student)
            .unwrap();
        let s2c = p.caller_for(s2.id).unwrap();
        assert!(p.monitor_exams(&s2c, s2.id).unwrap().is_empty());
        assert!(matches!(
            p.monitor_exams(&s2c, s1.id),
            Err(Error::NotAuthorized)
        ));
        assert!(matches!(
            p.performance_history(&s2c, s1.id),
            Err(Error::NotAuthorized)
        ));
        assert!(p
            .performance_history(&admin, s1.id)
            .unwrap()
            .entries
            .is_empty());
        assert!(matches!(
            p.monitor_exams(&admin, UserId::new()),
            Err(Error::UnknownUser(_))
        ));
    }
}
