use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use mutum_core::teleop::{replay, start_server, ServerHandle, ServerOptions};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn server(options: ServerOptions) -> ServerHandle {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    start_server(listener, options).await.unwrap()
}

async fn connect(h: &ServerHandle) -> Ws {
    connect_async(format!("ws://{}/session", h.addr)).await.unwrap().0
}

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = timeout(Duration::from_secs(5), ws.next()).await.expect("no message").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

/// Next message that is not a state snapshot.
async fn next_reply(ws: &mut Ws) -> Value {
    loop {
        let v = next_json(ws).await;
        if v.get("error").is_some() {
            return v;
        }
    }
}

async fn wait_for(ws: &mut Ws, pred: impl Fn(&Value) -> bool) -> Value {
    loop {
        let v = next_json(ws).await;
        if v.get("t").is_some() && pred(&v) {
            return v;
        }
    }
}

async fn send(ws: &mut Ws, text: &str) {
    ws.send(Message::text(text)).await.unwrap();
}

async fn http_get(h: &ServerHandle, path: &str) -> Value {
    let mut s = TcpStream::connect(h.addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").as_bytes())
        .await
        .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).await.unwrap();
    assert!(raw.starts_with("HTTP/1.1 200"), "{raw}");
    let body = raw.split("\r\n\r\n").nth(1).unwrap();
    serde_json::from_str(body).unwrap()
}

#[tokio::test]
async fn commands_drive_the_robot_and_are_acknowledged() {
    let h = server(ServerOptions::default()).await;
    let mut ws = connect(&h).await;
    let first = next_json(&mut ws).await;
    for key in ["t", "pos", "phase", "sync", "arc", "temp_c", "released", "freq", "heading", "ack", "dropped"] {
        assert!(first.get(key).is_some(), "snapshot lacks {key}: {first}");
    }

    send(&mut ws, r#"{"seq":1,"cmd":"set_frequency","hz":4}"#).await;
    send(&mut ws, r#"{"seq":2,"cmd":"start_rotation"}"#).await;
    let acked = wait_for(&mut ws, |v| v["ack"] == 2).await;
    assert_eq!(acked["freq"], 4.0);
    assert_eq!(acked["rotating"], true);
    let later = wait_for(&mut ws, |v| v["t"].as_f64().unwrap() > acked["t"].as_f64().unwrap() + 0.3).await;
    assert!(later["arc"].as_f64().unwrap() > acked["arc"].as_f64().unwrap());

    send(&mut ws, r#"{"seq":3,"cmd":"trigger_fus","duration_s":5}"#).await;
    let heated = wait_for(&mut ws, |v| v["ack"] == 3 && v["fus_active"] == true).await;
    assert!(heated["temp_c"].as_f64().unwrap() >= 36.0);

    ws.close(None).await.unwrap();
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn snapshots_arrive_near_30_hz() {
    let h = server(ServerOptions::default()).await;
    let mut ws = connect(&h).await;
    let a = next_json(&mut ws).await;
    let mut last = a.clone();
    for _ in 0..29 {
        last = next_json(&mut ws).await;
    }
    let dt = last["t"].as_f64().unwrap() - a["t"].as_f64().unwrap();
    assert!((dt - 29.0 / 30.0).abs() < 0.05, "29 intervals spanned {dt} s of simulated time");
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn bad_commands_get_errors_and_the_session_continues() {
    let h = server(ServerOptions::default()).await;
    let mut ws = connect(&h).await;

    send(&mut ws, "not json").await;
    let e = next_reply(&mut ws).await;
    assert_eq!(e["seq"], Value::Null);

    send(&mut ws, r#"{"seq":1,"cmd":"set_frequency","hz":9}"#).await;
    let e = next_reply(&mut ws).await;
    assert!(e["error"].as_str().unwrap().contains("frequency"), "{e}");

    send(&mut ws, r#"{"seq":5,"cmd":"reset"}"#).await;
    send(&mut ws, r#"{"seq":4,"cmd":"reset"}"#).await;
    let e = next_reply(&mut ws).await;
    assert_eq!(e["seq"], 4);

    send(&mut ws, r#"{"seq":6,"cmd":"load_scene","name":"nowhere"}"#).await;
    let e = next_reply(&mut ws).await;
    assert_eq!(e["seq"], 6);

    send(&mut ws, r#"{"seq":7,"cmd":"load_scene","name":"flat_wet"}"#).await;
    let s = wait_for(&mut ws, |v| v["ack"] == 7).await;
    assert_eq!(s["scene"], "flat_wet");
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn second_client_observes_but_cannot_command() {
    let h = server(ServerOptions::default()).await;
    let mut controller = connect(&h).await;
    next_json(&mut controller).await;
    let mut observer = connect(&h).await;
    next_json(&mut observer).await;

    send(&mut observer, r#"{"seq":1,"cmd":"start_rotation"}"#).await;
    let e = next_reply(&mut observer).await;
    assert!(e["error"].as_str().unwrap().contains("another client"));

    send(&mut controller, r#"{"seq":1,"cmd":"start_rotation"}"#).await;
    let seen = wait_for(&mut observer, |v| v["ack"] == 1).await;
    assert_eq!(seen["rotating"], true);

    controller.close(None).await.unwrap();
    drop(controller);
    // Control passes on once the controller has gone.
    tokio::time::sleep(Duration::from_millis(200)).await;
    drop(observer);
    let mut next = connect(&h).await;
    send(&mut next, r#"{"seq":2,"cmd":"stop_rotation"}"#).await;
    let s = wait_for(&mut next, |v| v["ack"] == 2).await;
    assert_eq!(s["rotating"], false);
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn state_and_scene_endpoints() {
    let h = server(ServerOptions::default()).await;
    let scenes = http_get(&h, "/scenes").await;
    let names: Vec<&str> = scenes.as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["flat_dry", "flat_wet", "phantom_rat", "invivo_rat"] {
        assert!(names.contains(&name), "{names:?}");
    }
    tokio::time::sleep(Duration::from_millis(100)).await;
    let state = http_get(&h, "/state").await;
    assert!(state["t"].as_f64().unwrap() > 0.0);
    assert_eq!(state["scene"], "phantom_rat");
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn recorded_sessions_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("live.jsonl");
    let h = server(ServerOptions {
        record: Some(path.clone()),
        ..ServerOptions::default()
    })
    .await;
    let mut ws = connect(&h).await;
    send(&mut ws, r#"{"seq":1,"cmd":"set_frequency","hz":5}"#).await;
    send(&mut ws, r#"{"seq":2,"cmd":"start_rotation"}"#).await;
    wait_for(&mut ws, |v| v["ack"] == 2).await;
    send(&mut ws, r#"{"seq":3,"cmd":"set_heading","rad":0.5}"#).await;
    let last = wait_for(&mut ws, |v| v["ack"] == 3 && v["arc"].as_f64().unwrap() > 0.0).await;
    h.shutdown().await.unwrap();

    let log = std::fs::read_to_string(&path).unwrap();
    let report = replay(&log).unwrap();
    assert_eq!(report.commands, 3);
    assert!(report.snapshots > 0);
    assert!(report.final_snapshot.t >= last["t"].as_f64().unwrap());
}
