//! Live endpoint: one simulated site stepped in real time, with every
//! connected console receiving the downlink and feeding the uplink.

use std::net::SocketAddr;
use std::time::Duration;

use anyhow::{Context, Result};
use awaresim_core::protocol::{decode, encode_string, Channel, Envelope, LinkQueue};
use awaresim_core::sim::{Scenario, World, TICK_MS};
use awaresim_core::SimConfig;
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

pub fn serve(
    host: &str,
    port: u16,
    scenario: Scenario,
    config: SimConfig,
    ticks: Option<u64>,
) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        let addr = listener.local_addr()?;
        println!("listening on ws://{addr}");

        let world = World::new(scenario, config)?;
        let (up_tx, up_rx) = mpsc::unbounded_channel();
        let (down_tx, _) = broadcast::channel::<String>(1024);

        let accept_down = down_tx.clone();
        tokio::spawn(async move {
            while let Ok((stream, peer)) = listener.accept().await {
                let up = up_tx.clone();
                let down = accept_down.subscribe();
                tokio::spawn(async move {
                    if let Err(e) = connection(stream, peer, up, down).await {
                        eprintln!("{peer}: {e:#}");
                    }
                });
            }
        });

        tokio::select! {
            _ = run_loop(world, up_rx, down_tx, ticks) => {}
            _ = tokio::signal::ctrl_c() => {}
        }
        Ok(())
    })
}

async fn run_loop(
    mut world: World,
    mut uplink_rx: mpsc::UnboundedReceiver<Envelope>,
    downlink_tx: broadcast::Sender<String>,
    ticks: Option<u64>,
) {
    let seed = world.scenario().seed;
    let mut uplink: LinkQueue<Envelope> = LinkQueue::new(world.config().link(seed, 1));
    let mut downlink: LinkQueue<Envelope> = LinkQueue::new(world.config().link(seed, 2));
    let mut interval = tokio::time::interval(Duration::from_millis(TICK_MS));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut announced = false;

    while ticks.is_none_or(|n| world.tick_count() < n) {
        interval.tick().await;
        let start = world.sim_time_ms();
        // console input stamped at the tick it arrived on
        while let Ok(e) = uplink_rx.try_recv() {
            uplink.send(e.channel, e, start);
        }
        let inbound = uplink.drain_due(start);
        let outbound = world.tick(&inbound);
        let now = world.sim_time_ms();
        for e in outbound {
            downlink.send(e.channel, e, now);
        }
        for e in downlink.drain_due(now) {
            match encode_string(&e) {
                // no subscribers is fine; the sim runs regardless
                Ok(line) => {
                    let _ = downlink_tx.send(line);
                }
                Err(err) => eprintln!("dropping unencodable {}: {err}", e.kind()),
            }
        }
        if world.is_complete() && !announced {
            announced = true;
            eprintln!("route complete at {:.2}s", world.time_s());
        }
    }
}

async fn connection(
    stream: TcpStream,
    peer: SocketAddr,
    uplink: mpsc::UnboundedSender<Envelope>,
    mut downlink: broadcast::Receiver<String>,
) -> Result<()> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    eprintln!("{peer}: connected");
    let (mut sink, mut source) = ws.split();
    loop {
        tokio::select! {
            msg = source.next() => {
                let Some(msg) = msg else { break };
                match msg? {
                    Message::Text(text) => {
                        for line in text.lines().filter(|l| !l.trim().is_empty()) {
                            match decode(line.as_bytes()) {
                                Ok(e) if e.channel == Channel::Ctrl => {
                                    if uplink.send(e).is_err() {
                                        return Ok(());
                                    }
                                }
                                Ok(e) => eprintln!("{peer}: ignoring {} on {}", e.kind(), e.channel),
                                Err(err) => eprintln!("{peer}: bad envelope: {err}"),
                            }
                        }
                    }
                    Message::Close(_) => break,
                    _ => {}
                }
            }
            line = downlink.recv() => match line {
                Ok(line) => sink.send(Message::text(line)).await?,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    eprintln!("{peer}: lagging, skipped {n} messages");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    eprintln!("{peer}: disconnected");
    Ok(())
}
