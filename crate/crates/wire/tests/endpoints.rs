use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use swarmstep_core::control::PosSetpoint;
use swarmstep_core::exec::Parallelism;
use swarmstep_core::sim::{
    AgentTypeGroup, Command, CommandBody, EventKind, GroupModel, GroupSpec, InfluenceMode, Layout, QuadSetup, World,
};
use swarmstep_core::state::{AgentBatch, AgentId, AgentTypeId, Vec3};
use swarmstep_wire::server::apply_inbound;
use swarmstep_wire::{
    AlgoClient, ClientError, CommandMsg, Connection, ControlMsg, Frame, Hub, HubConfig, Inbound, Message, RetryPolicy,
    ViewerInputMsg,
};

const WAIT: Duration = Duration::from_secs(5);

fn hover_world(n: usize) -> World {
    let poses = Layout::Grid { spacing: 1.0, columns: None, origin: [0.0, 0.0, 2.0] }.poses(n).unwrap();
    let batch = AgentBatch::create(AgentTypeId(0), &poses, 0).unwrap();
    let group = AgentTypeGroup::new(batch, GroupSpec::Quadrotor(QuadSetup::default())).unwrap();
    World::new(0.01, vec![group], Parallelism::Sequential).unwrap()
}

fn wait_until(mut cond: impl FnMut() -> bool) {
    let start = Instant::now();
    while !cond() {
        assert!(start.elapsed() < WAIT, "condition not reached in time");
        std::thread::sleep(Duration::from_millis(2));
    }
}

fn next_snapshot_tick(conn: &mut Connection) -> u64 {
    loop {
        match conn.recv(WAIT).unwrap().expect("message before timeout") {
            Message::Snapshot(s) => return s.tick,
            _ => continue,
        }
    }
}

fn hello(conn: &mut Connection) -> f64 {
    match conn.recv(WAIT).unwrap() {
        Some(Message::Control(ControlMsg::Hello { version, dt })) => {
            assert_eq!(version, swarmstep_wire::PROTOCOL_VERSION);
            dt
        }
        other => panic!("expected hello, got {other:?}"),
    }
}

#[test]
fn slow_reader_sees_monotonic_ticks_with_gaps() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    // ~120 kB per snapshot so the socket buffers fill quickly
    let mut world = hover_world(2000);
    world.add_sink(Box::new(hub.sink()));
    let mut conn = Connection::connect(hub.addrs().algo).unwrap();
    wait_until(|| hub.client_count() == 1);

    let start = Instant::now();
    world.run_ticks(100);
    let loop_time = start.elapsed();

    assert_eq!(hello(&mut conn), 0.01);
    let mut ticks = Vec::new();
    while ticks.last() != Some(&100) {
        ticks.push(next_snapshot_tick(&mut conn));
    }
    assert!(ticks.windows(2).all(|w| w[0] < w[1]), "{ticks:?}");
    assert!(ticks.len() < 100, "expected gaps, got all {} ticks", ticks.len());
    assert!(hub.stats().dropped > 0);
    assert!(loop_time < Duration::from_secs(30));
}

#[test]
fn two_algo_clients_merge_latest_wins() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut world = hover_world(3);
    world.add_sink(Box::new(hub.sink()));
    let mut a = Connection::connect(hub.addrs().algo).unwrap();
    let mut b = Connection::connect(hub.addrs().algo).unwrap();
    wait_until(|| hub.client_count() == 2);
    world.loop_tick();
    hello(&mut a);
    hello(&mut b);
    assert_eq!(next_snapshot_tick(&mut a), 1);
    assert_eq!(next_snapshot_tick(&mut b), 1);

    let target = |x: f64| PosSetpoint::hold(Vec3::new(x, 0.0, 2.0), 0.0);
    let send = |conn: &mut Connection, pairs: &[(u64, f64)]| {
        let cmds: Vec<Command> = pairs
            .iter()
            .map(|&(id, x)| Command { agent_id: AgentId(id), body: CommandBody::Position(target(x)) })
            .collect();
        conn.send(&Message::Command(CommandMsg::from_commands(1, &cmds))).unwrap();
    };
    send(&mut a, &[(0, 10.0), (2, 20.0)]);
    let first = hub.recv_timeout(WAIT).expect("a's commands");
    send(&mut b, &[(1, 11.0), (2, 30.0)]);
    let second = hub.recv_timeout(WAIT).expect("b's commands");
    assert!(apply_inbound(&mut world, [first, second]).is_empty());
    world.loop_tick();

    let GroupModel::Quadrotor(q) = world.groups()[0].model() else { panic!() };
    assert_eq!(q.position_setpoint(0), target(10.0));
    assert_eq!(q.position_setpoint(1), target(11.0));
    assert_eq!(q.position_setpoint(2), target(30.0));
}

#[test]
fn reconnect_resumes_at_current_tick() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut world = hover_world(4);
    world.add_sink(Box::new(hub.sink()));
    {
        let mut conn = Connection::connect(hub.addrs().viewer).unwrap();
        wait_until(|| hub.client_count() == 1);
        world.loop_tick();
        hello(&mut conn);
        assert_eq!(next_snapshot_tick(&mut conn), 1);
    }
    // publishing keeps going while nobody listens
    for _ in 0..20 {
        world.run_ticks(5);
        if hub.client_count() == 0 {
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    assert_eq!(hub.client_count(), 0);
    let now = world.tick();

    let mut conn = Connection::connect(hub.addrs().viewer).unwrap();
    wait_until(|| hub.client_count() == 1);
    world.loop_tick();
    hello(&mut conn);
    // a snapshot already with the publisher may be delivered first
    let first = next_snapshot_tick(&mut conn);
    assert!(first == now || first == now + 1, "resumed at {first}, current {now}");
}

#[test]
fn malformed_frame_closes_only_that_connection() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut world = hover_world(1);
    world.add_sink(Box::new(hub.sink()));
    let mut bad = TcpStream::connect(hub.addrs().algo).unwrap();
    let mut good = Connection::connect(hub.addrs().algo).unwrap();
    wait_until(|| hub.client_count() == 2);

    bad.write_all(&[0, 0, 0, 0, 1]).unwrap();
    bad.set_read_timeout(Some(WAIT)).unwrap();
    let mut sink = Vec::new();
    // the hello may arrive first; the stream must then end
    let _ = bad.read_to_end(&mut sink);
    wait_until(|| hub.client_count() == 1);

    world.loop_tick();
    hello(&mut good);
    assert_eq!(next_snapshot_tick(&mut good), 1);
}

#[test]
fn garbage_json_also_closes() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut conn = Connection::connect(hub.addrs().algo).unwrap();
    wait_until(|| hub.client_count() == 1);
    conn.send_raw(&Frame::new(swarmstep_wire::MSG_COMMAND, b"{not json".to_vec()).encode()).unwrap();
    wait_until(|| hub.client_count() == 0);
}

#[test]
fn viewer_inputs_and_rejections_reach_the_world() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut world = hover_world(2);
    let mut viewer = Connection::connect(hub.addrs().viewer).unwrap();
    let input = ViewerInputMsg { mode: InfluenceMode::Repel, point: [0.0, 0.0, 2.0], radius: 3.0, strength: 1.0 };
    viewer.send(&Message::ViewerInput(input)).unwrap();
    let mut bad_mode = input.encode_payload();
    bad_mode[0] = 7;
    viewer.send_raw(&Frame::new(swarmstep_wire::MSG_VIEWER_INPUT, bad_mode).encode()).unwrap();
    // unknown frame types are skipped without closing
    viewer.send_raw(&Frame::new(0x33, vec![1, 2, 3]).encode()).unwrap();
    viewer.send(&Message::Control(ControlMsg::Stop)).unwrap();

    let mut got = Vec::new();
    while got.len() < 3 {
        got.push(hub.recv_timeout(WAIT).expect("inbound"));
    }
    assert!(matches!(got[0], Inbound::Viewer { msg, .. } if msg == input));
    assert!(matches!(got[1], Inbound::RejectedInput { .. }));
    assert!(matches!(got[2], Inbound::Control { msg: ControlMsg::Stop, .. }));
    assert_eq!(apply_inbound(&mut world, got), vec![ControlMsg::Stop]);
    let events = world.loop_tick().events;
    assert!(events.iter().any(|e| e.kind == EventKind::AgentCommandRejected && e.agent_ids.is_empty()));
    assert!(world.snapshot().sections[0].vel()[1].norm() > 0.0);
}

#[test]
fn events_are_forwarded_to_clients() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut world = hover_world(2);
    world.add_sink(Box::new(hub.sink()));
    let mut conn = Connection::connect(hub.addrs().algo).unwrap();
    wait_until(|| hub.client_count() == 1);
    world.submit_command(Command { agent_id: AgentId(99), body: CommandBody::Motor([0.0; 4]) });
    world.loop_tick();
    hello(&mut conn);
    match conn.recv(WAIT).unwrap() {
        Some(Message::Event(e)) => {
            assert_eq!(e.kind, EventKind::AgentCommandRejected);
            assert_eq!(e.agent_ids, vec![AgentId(99)]);
        }
        other => panic!("expected event, got {other:?}"),
    }
}

#[test]
fn websocket_carries_the_same_frames() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut world = hover_world(3);
    world.add_sink(Box::new(hub.sink()));
    let addr = hub.addrs().ws.unwrap();
    let stream = TcpStream::connect(addr).unwrap();
    let (mut ws, _) = tungstenite::client(format!("ws://{addr}/"), stream).unwrap();
    wait_until(|| hub.client_count() == 1);
    world.loop_tick();

    let mut read_message = || loop {
        if let tungstenite::Message::Binary(data) = ws.read().unwrap() {
            let swarmstep_wire::Decoded::Frame { frame, consumed } = swarmstep_wire::decode_frame(&data).unwrap() else {
                panic!("partial frame in websocket message")
            };
            assert_eq!(consumed, data.len());
            return Message::from_frame(&frame).unwrap().unwrap();
        }
    };
    assert!(matches!(read_message(), Message::Control(ControlMsg::Hello { .. })));
    let Message::Snapshot(s) = read_message() else { panic!("expected snapshot") };
    assert_eq!((s.tick, s.agent_count()), (1, 3));

    let input = ViewerInputMsg { mode: InfluenceMode::Attract, point: [1.0, 2.0, 3.0], radius: 4.0, strength: 0.5 };
    ws.send(tungstenite::Message::binary(Message::ViewerInput(input).encode())).unwrap();
    assert!(matches!(hub.recv_timeout(WAIT), Some(Inbound::Viewer { msg, .. }) if msg == input));
}

#[test]
fn algo_client_strategy_failure_is_reported() {
    let hub = Hub::start(&HubConfig::ephemeral(0.02)).unwrap();
    let mut world = hover_world(1);
    world.add_sink(Box::new(hub.sink()));
    let mut client = AlgoClient::connect(hub.addrs().algo, RetryPolicy::none()).unwrap();
    assert_eq!(client.dt(), 0.02);
    let sim = std::thread::spawn(move || {
        for _ in 0..200 {
            world.loop_tick();
            std::thread::sleep(Duration::from_millis(2));
        }
        world.tick()
    });
    let mut calls = 0;
    let err = client
        .run(|snap, _| {
            calls += 1;
            if snap.tick >= 3 {
                Err("boom")
            } else {
                Ok(Vec::new())
            }
        })
        .unwrap_err();
    assert!(matches!(err, ClientError::Strategy(ref m) if m == "boom"));
    assert!(calls >= 2);
    assert_eq!(sim.join().unwrap(), 200);
}

#[test]
fn algo_client_empty_strategy_leaves_sim_alone() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut world = hover_world(2);
    let before = world.snapshot();
    world.add_sink(Box::new(hub.sink()));
    let addr = hub.addrs().algo;
    let client = std::thread::spawn(move || {
        let mut c = AlgoClient::connect(addr, RetryPolicy::default()).unwrap().with_snapshot_limit(10);
        c.run(|_, _| Ok::<_, String>(Vec::new())).unwrap()
    });
    wait_until(|| hub.client_count() == 1);
    while !client.is_finished() {
        world.loop_tick();
        apply_inbound(&mut world, hub.drain());
        std::thread::sleep(Duration::from_millis(1));
    }
    let summary = client.join().unwrap();
    assert_eq!(summary.snapshots, 10);
    assert_eq!(summary.command_msgs, 0);
    let after = world.snapshot();
    for (a, b) in before.sections[0].pos().iter().zip(after.sections[0].pos()) {
        assert!((*a - *b).norm() < 1e-12);
    }
}

#[test]
fn algo_client_reconnects_after_server_restart() {
    let hub = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let addr = hub.addrs().algo;
    let client = std::thread::spawn(move || {
        let policy = RetryPolicy { attempts: 50, initial: Duration::from_millis(10), max: Duration::from_millis(50) };
        let mut c = AlgoClient::connect(addr, policy).unwrap().with_snapshot_limit(2);
        c.run(|_, _| Ok::<_, String>(Vec::new())).unwrap()
    });
    let mut world = hover_world(1);
    world.add_sink(Box::new(hub.sink()));
    wait_until(|| hub.client_count() == 1);
    world.loop_tick();
    std::thread::sleep(Duration::from_millis(50));
    drop(world);
    hub.shutdown();

    let cfg = HubConfig { algo_port: addr.port(), ..HubConfig::ephemeral(0.01) };
    let hub = Hub::start(&cfg).unwrap();
    let mut world = hover_world(1);
    world.add_sink(Box::new(hub.sink()));
    while !client.is_finished() {
        world.loop_tick();
        std::thread::sleep(Duration::from_millis(5));
    }
    let summary = client.join().unwrap();
    assert_eq!(summary.snapshots, 2);
    assert_eq!(summary.reconnects, 1);
}

/// Per-tick cost of the loop thread with four clients that never read,
/// against the same world with nobody connected. Blocks are interleaved and
/// compared by median.
///
/// Thread CPU time isolates what the loop itself does. Wall time is also
/// checked when there is a spare core for the endpoint threads; on a single
/// core they necessarily share the CPU with the loop.
#[test]
fn slow_clients_do_not_inflate_step_time() {
    use cpu_time::ThreadTime;

    let n = 1024;
    let hub_a = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let hub_b = Hub::start(&HubConfig::ephemeral(0.01)).unwrap();
    let mut quiet = hover_world(n);
    quiet.add_sink(Box::new(hub_a.sink()));
    let mut busy = hover_world(n);
    busy.add_sink(Box::new(hub_b.sink()));
    let _clients: Vec<TcpStream> = (0..4).map(|_| TcpStream::connect(hub_b.addrs().algo).unwrap()).collect();
    wait_until(|| hub_b.client_count() == 4);

    // fill the socket buffers first so the writers are parked
    busy.run_ticks(200);
    quiet.run_ticks(200);
    let mut cpu = (Vec::new(), Vec::new());
    let mut wall = (Vec::new(), Vec::new());
    for _ in 0..41 {
        for (k, world) in [&mut quiet, &mut busy].into_iter().enumerate() {
            let (c0, w0) = (ThreadTime::now(), Instant::now());
            world.run_ticks(20);
            let (c, w) = (c0.elapsed().as_secs_f64() / 20.0, w0.elapsed().as_secs_f64() / 20.0);
            if k == 0 {
                cpu.0.push(c);
                wall.0.push(w);
            } else {
                cpu.1.push(c);
                wall.1.push(w);
            }
        }
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (cq, cb) = (median(cpu.0), median(cpu.1));
    let (wq, wb) = (median(wall.0), median(wall.1));
    println!("loop cpu per tick: none {:.3} ms, 4 slow {:.3} ms ({:+.1}%)", cq * 1e3, cb * 1e3, (cb / cq - 1.0) * 100.0);
    println!("loop wall per tick: none {:.3} ms, 4 slow {:.3} ms ({:+.1}%)", wq * 1e3, wb * 1e3, (wb / wq - 1.0) * 100.0);
    assert!(hub_b.stats().dropped > 0);
    assert!(cb <= cq * 1.05, "loop cpu inflation {:.1}%", (cb / cq - 1.0) * 100.0);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores >= 2 {
        assert!(wb <= wq * 1.05, "loop wall inflation {:.1}%", (wb / wq - 1.0) * 100.0);
    }
}
