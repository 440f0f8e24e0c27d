use std::net::SocketAddr;
use std::time::Duration;

use deskbench::envs::SocialNavScenario;
use deskbench::record::{read_jsonl, score_record};
use deskbench::runner::verify_replay;
use deskbench_server::protocol::{EpisodeStatus, ServerMsg, Snapshot};
use deskbench_server::{serve, ControlMsg, ServeError, ServeOptions, ServerHandle};
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn scenario() -> SocialNavScenario {
    SocialNavScenario {
        arena_radius: 6.0,
        n_pedestrians: 3,
        min_start_goal_dist: 10.0,
        ..SocialNavScenario::default()
    }
}

fn any_port() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

async fn start(pace: f64) -> ServerHandle {
    let opts = ServeOptions {
        pace,
        snapshot_hz: 50.0,
        seed: 3,
        ..ServeOptions::default()
    };
    serve(scenario(), any_port(), opts).await.unwrap()
}

async fn recv(ws: &mut Ws) -> ServerMsg {
    loop {
        let m = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("server went quiet")
            .expect("stream ended")
            .unwrap();
        if let Message::Text(t) = m {
            return ServerMsg::parse(&t).unwrap();
        }
    }
}

async fn reply(ws: &mut Ws) -> ServerMsg {
    loop {
        match recv(ws).await {
            ServerMsg::Snapshot(_) => {}
            m => return m,
        }
    }
}

async fn send(ws: &mut Ws, msg: ControlMsg) {
    ws.send(Message::Text(msg.to_text(0).into())).await.unwrap();
}

async fn connect(h: &ServerHandle) -> Ws {
    let (mut ws, _) = connect_async(h.url()).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMsg::Welcome(_)));
    ws
}

async fn subscribed(h: &ServerHandle) -> Ws {
    let mut ws = connect(h).await;
    send(&mut ws, ControlMsg::Subscribe { channel: "snapshots".into() }).await;
    ws
}

async fn next_snapshot(ws: &mut Ws) -> Snapshot {
    loop {
        if let ServerMsg::Snapshot(s) = recv(ws).await {
            return *s;
        }
    }
}

#[tokio::test]
async fn snapshot_ticks_strictly_increase() {
    let h = start(4.0).await;
    let mut ws = subscribed(&h).await;
    let mut last = 0;
    for _ in 0..20 {
        let s = next_snapshot(&mut ws).await;
        assert!(s.tick > last);
        assert_eq!(s.entities.len(), 1 + 3);
        last = s.tick;
    }
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn teleop_beyond_limits_is_clamped() {
    let h = start(4.0).await;
    let mut ws = subscribed(&h).await;
    let v_max = scenario().v_max;
    send(&mut ws, ControlMsg::Teleop { v: 2.0 * v_max, omega: 0.0 }).await;
    assert_eq!(reply(&mut ws).await, ServerMsg::Authority { granted: true });
    loop {
        let s = next_snapshot(&mut ws).await;
        if s.sim_step > 0 && s.command.v != 0.0 {
            assert_eq!(s.command.v, v_max);
            break;
        }
    }
    let recs = h.shutdown().await.unwrap();
    let cmds = deskbench::record::robot_commands(&recs[0]).unwrap();
    assert!(cmds.iter().all(|c| c.v <= v_max));
}

#[tokio::test]
async fn pause_holds_sim_time() {
    let h = start(4.0).await;
    let mut ws = subscribed(&h).await;
    next_snapshot(&mut ws).await;
    send(&mut ws, ControlMsg::Pause).await;
    let mut s = next_snapshot(&mut ws).await;
    while !s.paused {
        s = next_snapshot(&mut ws).await;
    }
    let t = s.sim_time;
    for _ in 0..5 {
        let n = next_snapshot(&mut ws).await;
        assert_eq!(n.sim_time, t);
        assert!(n.tick > s.tick);
        s = n;
    }
    send(&mut ws, ControlMsg::Resume).await;
    loop {
        if next_snapshot(&mut ws).await.sim_time > t {
            break;
        }
    }
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn malformed_message_gets_error_and_connection_survives() {
    let h = start(4.0).await;
    let mut ws = connect(&h).await;
    ws.send(Message::Text("{\"type\":".into())).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMsg::Error { .. }));
    ws.send(Message::Text(r#"{"type":"warp","payload":{}}"#.into())).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMsg::Error { .. }));
    send(&mut ws, ControlMsg::Subscribe { channel: "snapshots".into() }).await;
    next_snapshot(&mut ws).await;
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn observer_cannot_drive() {
    let h = start(4.0).await;
    let mut pilot = connect(&h).await;
    let mut observer = subscribed(&h).await;
    send(&mut pilot, ControlMsg::Teleop { v: 0.5, omega: 0.0 }).await;
    assert_eq!(recv(&mut pilot).await, ServerMsg::Authority { granted: true });
    send(&mut observer, ControlMsg::Teleop { v: 0.0, omega: 1.0 }).await;
    loop {
        match recv(&mut observer).await {
            ServerMsg::Error { message } => {
                assert!(message.contains("observer"));
                break;
            }
            ServerMsg::Snapshot(_) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn port_in_use_is_a_startup_error() {
    let h = start(1.0).await;
    let err = serve(scenario(), h.local_addr(), ServeOptions::default()).await;
    assert!(matches!(err, Err(ServeError::Bind { .. })));
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn session_records_score_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let opts = ServeOptions {
        pace: 0.0,
        snapshot_hz: 50.0,
        seed: 11,
        record_path: Some(path.clone()),
        ..ServeOptions::default()
    };
    let h = serve(scenario(), any_port(), opts).await.unwrap();
    let mut ws = subscribed(&h).await;
    send(&mut ws, ControlMsg::Teleop { v: 1.0, omega: 0.2 }).await;
    loop {
        let s = next_snapshot(&mut ws).await;
        if s.episode_status != EpisodeStatus::Running {
            break;
        }
    }
    send(&mut ws, ControlMsg::Reset { seed: None }).await;
    // Snapshots already in flight may predate the reset.
    while next_snapshot(&mut ws).await.episode != 1 {}
    let live = h.shutdown().await.unwrap();
    let on_disk = read_jsonl(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(on_disk.len(), live.len());
    assert!(live.len() >= 2);
    for (a, b) in live.iter().zip(&on_disk) {
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        verify_replay(b).unwrap();
        let row = score_record(b).unwrap();
        assert_eq!(row.policy, "human");
    }
    assert_eq!(on_disk[1].header.episode, 1);
}
