#![allow(dead_code)]

use std::sync::Arc;

use arac_core::{Platform, PlatformConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use reqwest::multipart::{Form, Part};
use reqwest::Method;
use serde_json::{json, Value};
use tokio::sync::oneshot;

pub const ADMIN: (&str, &str) = ("admin", "admin-password");
pub const TEACHER: (&str, &str) = ("teacher", "teacher-password");
pub const SENTENCE: &str = "ذهب محمد ثم عاد";

/// A live server on an ephemeral port.
pub struct TestServer {
    pub base: String,
    pub platform: Arc<Platform>,
    pub http: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
}

impl TestServer {
    pub async fn start() -> Self {
        Self::start_with(Platform::in_memory(PlatformConfig::default())).await
    }

    pub async fn start_with(platform: Platform) -> Self {
        let platform = Arc::new(platform);
        platform.bootstrap_admin(ADMIN.0, ADMIN.1).unwrap();
        let listener = arac_server::bind("127.0.0.1:0".parse().unwrap())
            .await
            .unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop, stopped) = oneshot::channel::<()>();
        let p = platform.clone();
        tokio::spawn(async move {
            arac_server::serve(listener, p, async {
                let _ = stopped.await;
            })
            .await
            .unwrap();
        });
        Self {
            base,
            platform,
            http: reqwest::Client::new(),
            stop: Some(stop),
        }
    }

    pub fn request(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
    ) -> reqwest::RequestBuilder {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        req
    }

    pub async fn send(&self, req: reqwest::RequestBuilder) -> (u16, String) {
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.text().await.unwrap())
    }

    /// JSON call; the response body is parsed when it is JSON.
    pub async fn call(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (u16, Value) {
        let mut req = self.request(method, path, token);
        if let Some(b) = body {
            req = req.json(&b);
        }
        let (status, text) = self.send(req).await;
        (
            status,
            serde_json::from_str(&text).unwrap_or(Value::String(text)),
        )
    }

    pub async fn ok(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> Value {
        let (status, v) = self.call(method.clone(), path, token, body).await;
        assert!(
            (200..300).contains(&status),
            "{method} {path} -> {status}: {v}"
        );
        v
    }

    pub async fn login(&self, (login, password): (&str, &str)) -> String {
        let v = self
            .ok(
                Method::POST,
                "/api/login",
                None,
                Some(json!({"login": login, "password": password})),
            )
            .await;
        v["token"].as_str().unwrap().to_owned()
    }

    pub async fn create_user(
        &self,
        admin: &str,
        login: &str,
        password: &str,
        role: &str,
    ) -> String {
        let v = self
            .ok(
                Method::POST,
                "/api/users",
                Some(admin),
                Some(json!({"login": login, "password": password, "role": role})),
            )
            .await;
        v["id"].as_str().unwrap().to_owned()
    }

    pub async fn ingest(&self, token: &str, title: &str, theme: &str, body: &[u8]) -> (u16, Value) {
        let meta = json!({
            "title": title,
            "theme_id": theme,
            "lom": {"general": {"title": title}, "educational": {"difficulty": "easy", "context": "school"}},
        });
        let form = Form::new()
            .part(
                "metadata",
                Part::text(meta.to_string())
                    .mime_str("application/json")
                    .unwrap(),
            )
            .part("body", Part::bytes(body.to_vec()).file_name("text.txt"));
        let (status, text) = self
            .send(
                self.request(Method::POST, "/api/texts", Some(token))
                    .multipart(form),
            )
            .await;
        (
            status,
            serde_json::from_str(&text).unwrap_or(Value::String(text)),
        )
    }

    /// Creates a text, a gap-everything exercise and an exam over it, and
    /// assigns the exam to the given students.
    pub async fn exam_over(
        &self,
        teacher: &str,
        theme: &str,
        body: &str,
        students: &[&str],
    ) -> Built {
        let (status, text) = self.ingest(teacher, "نص", theme, body.as_bytes()).await;
        assert_eq!(status, 201, "{text}");
        let n = text["tokens"].as_array().unwrap().len();
        let ex = self
            .ok(
                Method::POST,
                "/api/exercises",
                Some(teacher),
                Some(json!({"text_id": text["id"], "gaps": (0..n).collect::<Vec<_>>(), "title": "t"})),
            )
            .await;
        let exam = self
            .ok(
                Method::POST,
                "/api/exams",
                Some(teacher),
                Some(json!({"title": "exam", "exercise_ids": [ex["id"]]})),
            )
            .await;
        let assigned = self
            .ok(
                Method::POST,
                &format!("/api/exams/{}/assign", exam["id"].as_str().unwrap()),
                Some(teacher),
                Some(json!({"student_ids": students})),
            )
            .await;
        Built {
            text_id: s(&text["id"]),
            exercise_id: s(&ex["id"]),
            exam_id: s(&exam["id"]),
            assignments: assigned
                .as_array()
                .unwrap()
                .iter()
                .map(|a| s(&a["id"]))
                .collect(),
            expected: ex["gaps"]
                .as_array()
                .unwrap()
                .iter()
                .map(|g| s(&g["expected"]))
                .collect(),
        }
    }

    pub async fn stop(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}

pub fn s(v: &Value) -> String {
    v.as_str().unwrap().to_owned()
}

pub struct Built {
    pub text_id: String,
    pub exercise_id: String,
    pub exam_id: String,
    pub assignments: Vec<String>,
    pub expected: Vec<String>,
}

/// The scripted end-to-end run. Returns the teacher-visible report.
pub async fn scripted_scenario(server: &TestServer) -> Value {
    let admin = server.login(ADMIN).await;
    let theme = server
        .ok(
            Method::POST,
            "/api/themes",
            Some(&admin),
            Some(json!({"name": "سياسة"})),
        )
        .await;
    let theme = s(&theme["id"]);
    server
        .create_user(&admin, TEACHER.0, TEACHER.1, "teacher")
        .await;
    let student_id = server
        .create_user(&admin, "student", "student-password", "student")
        .await;

    let teacher = server.login(TEACHER).await;
    let (status, text) = server
        .ingest(&teacher, "خبر", &theme, SENTENCE.as_bytes())
        .await;
    assert_eq!(status, 201, "{text}");
    let text_id = s(&text["id"]);

    let (status, taxonomy) = server
        .send(
            server
                .request(
                    Method::POST,
                    "/api/taxonomies?name=حروف العطف",
                    Some(&teacher),
                )
                .body("و\nف\nثم\nأو\n"),
        )
        .await;
    assert_eq!(status, 201, "{taxonomy}");
    let taxonomy: Value = serde_json::from_str(&taxonomy).unwrap();
    let annotations = server
        .ok(
            Method::POST,
            &format!("/api/texts/{text_id}/annotate/{}", s(&taxonomy["id"])),
            Some(&teacher),
            None,
        )
        .await;
    let annotations = annotations.as_array().unwrap();
    assert_eq!(annotations.len(), 1);
    assert_eq!(annotations[0]["token_index"], 2);

    let exercise = server
        .ok(
            Method::POST,
            "/api/exercises",
            Some(&teacher),
            Some(json!({"text_id": text_id, "gaps": [0, 1, 2, 3], "title": "تمرين", "instructions": "املأ الفراغات"})),
        )
        .await;
    let exercise_id = s(&exercise["id"]);
    let exam = server
        .ok(
            Method::POST,
            "/api/exams",
            Some(&teacher),
            Some(json!({"title": "اختبار", "exercise_ids": [exercise_id]})),
        )
        .await;
    let assigned = server
        .ok(
            Method::POST,
            &format!("/api/exams/{}/assign", s(&exam["id"])),
            Some(&teacher),
            Some(json!({"student_ids": [student_id]})),
        )
        .await;
    let assignment_id = s(&assigned[0]["id"]);

    let student = server.login(("student", "student-password")).await;
    let mine = server
        .ok(Method::GET, "/api/me/assignments", Some(&student), None)
        .await;
    assert_eq!(mine[0]["id"], assignment_id.as_str());
    let (status, view) = server
        .send(server.request(
            Method::GET,
            &format!("/api/exercises/{exercise_id}/view"),
            Some(&student),
        ))
        .await;
    assert_eq!(status, 200);
    for word in SENTENCE.split(' ') {
        assert!(!view.contains(word), "view leaks {word}: {view}");
    }
    assert_eq!(
        serde_json::from_str::<Value>(&view).unwrap()["gap_count"],
        4
    );

    let answers: Vec<Value> = ["ذهب", "محمد", "و", "عاد"]
        .iter()
        .enumerate()
        .map(|(i, a)| json!({"exercise_id": exercise_id, "gap": i + 1, "answer": a}))
        .collect();
    let graded = server
        .ok(
            Method::POST,
            &format!("/api/assignments/{assignment_id}/submit"),
            Some(&student),
            Some(json!({"answers": answers})),
        )
        .await;
    assert_eq!(graded["correct_count"], 3);
    let (again, body) = server
        .call(
            Method::POST,
            &format!("/api/assignments/{assignment_id}/submit"),
            Some(&student),
            Some(json!({"answers": []})),
        )
        .await;
    assert_eq!(again, 409);
    assert_eq!(body["code"], "already_accomplished");

    let (status, raw) = server
        .send(server.request(
            Method::GET,
            &format!("/api/assignments/{assignment_id}/report"),
            Some(&teacher),
        ))
        .await;
    assert_eq!(status, 200);
    assert!(raw.contains("\"performance\":75.0"), "{raw}");
    let report: Value = serde_json::from_str(&raw).unwrap();
    let history = server
        .ok(
            Method::GET,
            &format!("/api/students/{student_id}/history"),
            Some(&teacher),
            None,
        )
        .await;
    assert_eq!(history["entries"][0]["performance"], 75.0);
    report
}

pub struct FuzzOutcome {
    pub requests: usize,
    pub leaks: Vec<String>,
}

/// Two students with one exam each; the first has submitted. Random
/// requests are issued as either student against both students' resources
/// and every response is checked for answers the caller has not earned and
/// for the other student's data.
pub async fn isolation_fuzz(server: &TestServer, requests: usize, seed: u64) -> FuzzOutcome {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);

    let admin = server.login(ADMIN).await;
    let theme = server
        .ok(
            Method::POST,
            "/api/themes",
            Some(&admin),
            Some(json!({"name": "فنون"})),
        )
        .await;
    let theme = s(&theme["id"]);
    server
        .create_user(&admin, "fuzz-teacher", "teacher-password", "teacher")
        .await;
    let a_id = server
        .create_user(&admin, "amal", "student-password", "student")
        .await;
    let b_id = server
        .create_user(&admin, "badr", "student-password", "student")
        .await;
    let teacher = server.login(("fuzz-teacher", "teacher-password")).await;
    let a = server.login(("amal", "student-password")).await;
    let b = server.login(("badr", "student-password")).await;

    let exam_a = server
        .exam_over(&teacher, &theme, "كتب الطالب درسه", &[&a_id])
        .await;
    let exam_b = server
        .exam_over(&teacher, &theme, "رسم الفنان لوحته", &[&b_id])
        .await;
    let answers: Vec<Value> = exam_a
        .expected
        .iter()
        .enumerate()
        .map(|(i, w)| json!({"exercise_id": exam_a.exercise_id, "gap": i + 1, "answer": w}))
        .collect();
    server
        .ok(
            Method::POST,
            &format!("/api/assignments/{}/submit", exam_a.assignments[0]),
            Some(&a),
            Some(json!({"answers": answers})),
        )
        .await;

    let targets = |own: &Built,
                   other: &Built,
                   other_id: &str,
                   me: &str|
     -> Vec<(Method, String, Option<Value>)> {
        vec![
            (Method::GET, format!("/api/texts/{}", other.text_id), None),
            (Method::GET, format!("/api/texts/{}", own.text_id), None),
            (Method::GET, "/api/texts".into(), None),
            (Method::GET, "/api/texts?keyword=ال".into(), None),
            (
                Method::GET,
                format!("/api/texts/{}/annotations", other.text_id),
                None,
            ),
            (
                Method::GET,
                format!("/api/texts/{}/annotations", own.text_id),
                None,
            ),
            (
                Method::GET,
                format!("/api/exercises/{}/view", other.exercise_id),
                None,
            ),
            (
                Method::GET,
                format!("/api/exercises/{}/view", own.exercise_id),
                None,
            ),
            (
                Method::GET,
                format!("/api/assignments/{}/report", other.assignments[0]),
                None,
            ),
            (
                Method::GET,
                format!("/api/assignments/{}/report", own.assignments[0]),
                None,
            ),
            (
                Method::GET,
                format!("/api/students/{other_id}/history"),
                None,
            ),
            (Method::GET, format!("/api/students/{me}/history"), None),
            (
                Method::GET,
                format!("/api/students/{other_id}/assignments"),
                None,
            ),
            (Method::GET, format!("/api/students/{me}/assignments"), None),
            (Method::GET, "/api/me/assignments".into(), None),
            (Method::GET, "/api/taxonomies".into(), None),
            (Method::GET, "/api/corpus/export".into(), None),
            (
                Method::POST,
                format!("/api/assignments/{}/submit", other.assignments[0]),
                Some(json!({"answers": []})),
            ),
            (
                Method::POST,
                "/api/exercises".into(),
                Some(json!({"text_id": other.text_id, "gaps": [0]})),
            ),
            (
                Method::POST,
                format!("/api/exams/{}/assign", other.exam_id),
                Some(json!({"student_ids": [me]})),
            ),
            (Method::DELETE, format!("/api/users/{other_id}"), None),
        ]
    };
    let a_targets = targets(&exam_a, &exam_b, &b_id, &a_id);
    let b_targets = targets(&exam_b, &exam_a, &a_id, &b_id);

    let mut leaks = Vec::new();
    for i in 0..requests {
        let as_a = rng.gen_bool(0.5);
        let (token, other_id, pool, forbidden): (&str, &str, _, Vec<&String>) = if as_a {
            // a has earned its own answers, never b's
            (&a, &b_id, &a_targets, exam_b.expected.iter().collect())
        } else {
            (
                &b,
                &a_id,
                &b_targets,
                exam_a.expected.iter().chain(&exam_b.expected).collect(),
            )
        };
        let (method, path, body) = pool.choose(&mut rng).unwrap().clone();
        let mut req = server.request(method.clone(), &path, Some(token));
        if let Some(body) = body {
            req = req.json(&body);
        }
        let (status, text) = server.send(req).await;
        if let Some(word) = forbidden.iter().find(|w| text.contains(w.as_str())) {
            leaks.push(format!(
                "#{i} {method} {path} -> {status} contains answer {word:?}"
            ));
        }
        if status == 200 && text.contains(other_id) {
            leaks.push(format!(
                "#{i} {method} {path} -> 200 contains the other student's id"
            ));
        }
        if (200..300).contains(&status) && method != Method::GET {
            leaks.push(format!(
                "#{i} {method} {path} -> {status}: student mutation accepted"
            ));
        }
    }
    FuzzOutcome { requests, leaks }
}
