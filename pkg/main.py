"""
Evidential Deep Learning Toolkit
Main Entry Point

Command-line harness for the evidential experiments: softmax pretraining,
evidential training and fine-tuning, risk-aware heads, fusion of models with
disjoint label sets, evaluation, the rotated-digit sweep and gradient checks.
"""

import sys
import argparse
import traceback
from typing import Any, Dict, List

from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from utils.config import ALL_MODES, ACTIVATIONS, COMMANDS, HEAD_INITS, RunConfig
from utils.errors import EvidentialError
from utils.logging_config import setup_logging

console = Console()

DESCRIPTIONS = {
    'pretrain': 'Entrenar un clasificador softmax (o softmax con costos)',
    'train-edl': 'Entrenar un modelo evidencial desde cero',
    'finetune': 'Ajustar un modelo softmax preentrenado con la pérdida evidencial',
    'train-risk': 'Entrenamiento sensible al riesgo (risk-edl, edl-p, edl-pg)',
    'fuse': 'Fusionar dos modelos con conjuntos de clases disjuntos',
    'rotate-sweep': 'Barrido de rotación de 0 a 180 grados sobre una imagen',
    'eval': 'Evaluar un checkpoint (precisión, costo, AUC de entropía, ROC/PR)',
    'gradcheck': 'Verificar gradientes por diferencias finitas',
}


def print_banner():
    """Print the application banner."""
    banner = """
    ╔═══════════════════════════════════════════════════════╗
    ║                                                       ║
    ║        EVIDENTIAL DEEP LEARNING TOOLKIT               ║
    ║                                                       ║
    ║   Incertidumbre y decisiones sensibles al riesgo      ║
    ║                                                       ║
    ╚═══════════════════════════════════════════════════════╝
    """
    console.print(Panel(banner, style="bold blue"))


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by every command. Defaults are None so config files can fill them."""
    data = parser.add_argument_group('datos')
    data.add_argument('--data-images', type=str, help='Archivo IDX de imágenes (puede ser .gz)')
    data.add_argument('--data-labels', type=str, help='Archivo IDX de etiquetas (puede ser .gz)')
    data.add_argument('--synth', type=str, help='Datos sintéticos, ej: blobs:K=3,n=200,sigma=0.1')
    data.add_argument('--classes', type=str, help='Subconjunto de clases, ej: 0,1,2,3,4')
    data.add_argument('--limit', type=int, help='Usar solo las primeras N muestras')
    data.add_argument('--ood', type=str, help='Datos fuera de distribución: noise, synth o idx:<imgs>,<labels>')

    model = parser.add_argument_group('modelo y entrenamiento')
    model.add_argument('--backbone', type=str, help='mlp:128 | mlp:256,128 | cnn:w=1.0 (default: mlp:128)')
    model.add_argument('--mode', type=str, choices=ALL_MODES, help='Régimen de entrenamiento')
    model.add_argument('--epochs', type=int, help='Número de épocas')
    model.add_argument('--lr', type=float, help='Tasa de aprendizaje')
    model.add_argument('--act', type=str, choices=ACTIVATIONS, help='Activación de evidencia')
    model.add_argument('--kappa', type=float, help='Peso de la penalización riskEDL (default: 0.01)')
    model.add_argument('--anneal-T', dest='anneal_T', type=int, help='Horizonte de annealing del KL (default: 10)')
    model.add_argument('--risk-matrix', type=str, help='mnist | grouped | cifar10 | zero | ruta a CSV')
    model.add_argument('--cost-weight', type=float, help='Peso del costo esperado en cs-softmax (default: 0.1)')
    model.add_argument('--head-init', type=str, choices=HEAD_INITS, help='Inicialización de la cabeza pignística')
    model.add_argument('--batch-size', type=int, help='Tamaño de lote (default: 64)')
    model.add_argument('--seed', type=int, help='Semilla (obligatoria)')

    files = parser.add_argument_group('checkpoints y salida')
    files.add_argument('--base', type=str, help='Checkpoint base para finetune / train-risk')
    files.add_argument('--ckpt', type=str, help='Checkpoint a evaluar')
    files.add_argument('--ckpt-a', type=str, help='Primer checkpoint a fusionar')
    files.add_argument('--ckpt-b', type=str, help='Segundo checkpoint a fusionar')
    files.add_argument('--image-index', type=int, help='Índice de la imagen para rotate-sweep')
    files.add_argument('--digit', type=int, help='Usar la primera imagen de este dígito (default: 1)')
    files.add_argument('--angle-step', type=int, help='Paso angular en grados (default: 10)')
    files.add_argument('--out', type=str, help='Directorio de salida (default: ./output)')
    files.add_argument('--config', type=str, help='Archivo de configuración JSON o YAML')

    logs = parser.add_argument_group('logging')
    logs.add_argument('--verbose', action='store_true', default=None, help='Mostrar progreso por época')
    logs.add_argument('--debug', action='store_true', default=None, help='Modo debug completo')
    logs.add_argument('--log-file', type=str, help='Guardar logs en archivo (ej: logs/run.log)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Toolkit de Deep Learning Evidencial",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos de uso:
  python main.py train-edl --synth blobs:K=3,n=200,sigma=0.5 --epochs 30 --seed 0 --out output/edl
  python main.py pretrain --data-images train-images-idx3-ubyte --data-labels train-labels-idx1-ubyte --limit 10000 --seed 0
  python main.py train-risk --mode edl-p --base output/edl/checkpoint.bin --risk-matrix mnist --seed 0 ...
  python main.py eval --ckpt output/edl/checkpoint.bin --synth blobs:K=3 --ood synth --seed 1
  python main.py gradcheck
        """
    )
    subparsers = parser.add_subparsers(dest='command', help='Comandos disponibles')
    for command in COMMANDS:
        add_common_arguments(subparsers.add_parser(command, help=DESCRIPTIONS[command]))
    return parser


def flags_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {key: value for key, value in vars(args).items() if key not in ('command', 'config')}
    return flags


def show_table(rows: List[Dict[str, Any]]) -> None:
    table = Table(show_header=True, header_style="bold cyan")
    for column in rows[0]:
        table.add_column(column)
    for row in rows:
        styled = []
        for key, value in row.items():
            if key == 'passed':
                styled.append("[green]ok[/green]" if value else "[red]FALLO[/red]")
            elif isinstance(value, float):
                styled.append(f"{value:.3e}")
            else:
                styled.append(str(value))
        table.add_row(*styled)
    console.print(table)


def show_result(result) -> None:
    """Render a CommandResult."""
    if result.table:
        show_table(result.table)
    lines = [f"[cyan]{key}:[/cyan] {value!r}" for key, value in result.summary.items()]
    lines += [f"[dim]→ {path}[/dim]" for path in result.files]
    style = "green" if result.exit_code == 0 else "red"
    console.print(Panel("\n".join(lines), title=f"Resultado: {result.command}", style=style))


def run(args: argparse.Namespace) -> int:
    """Run one command and return the process exit code."""
    from experiments.commands import run_command

    config = RunConfig.from_sources(args.command, flags_from_args(args), config_path=args.config)
    setup_logging(bool(config.verbose), bool(config.debug), config.log_file)
    if config.debug or config.verbose:
        console.print(f"[yellow]🔍 Modo {'DEBUG' if config.debug else 'VERBOSE'} activado[/yellow]")
        if config.log_file:
            console.print(f"[yellow]📝 Logs guardándose en: {config.log_file}[/yellow]")

    console.print(f"\n[bold green]▶ {DESCRIPTIONS[args.command]}[/bold green]")
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(f"Ejecutando {args.command}...", total=None)
        result = run_command(config)
        progress.update(task, description="✅ Listo")

    show_result(result)
    if result.exit_code:
        console.print(f"\n[bold red]❌ {args.command} terminó con errores[/bold red]\n")
    else:
        console.print(f"\n[bold green]🎉 {args.command} completado[/bold green]\n")
    return result.exit_code


def main():
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args()

    if not args.command:
        print_banner()
        parser.print_help()
        sys.exit(0)

    try:
        code = run(args)
    except EvidentialError as e:
        console.print(f"\n[bold red]Error ({type(e).__name__}):[/bold red] {e}\n")
        sys.exit(e.exit_code)
    except ImportError as e:
        console.print(f"\n[bold red]Error:[/bold red] {str(e)}")
        console.print("\n[yellow]Asegúrate de haber instalado las dependencias:[/yellow]")
        console.print("  pip install -r requirements.txt\n")
        sys.exit(1)
    except Exception as e:
        console.print("\n[bold red]Error inesperado:[/bold red]")
        console.print(f"{str(e)}\n")
        traceback.print_exc()
        sys.exit(1)
    sys.exit(code)


if __name__ == '__main__':
    main()
